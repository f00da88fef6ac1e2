//! Unified full-envelope controller.
//!
//! One cascade covers hover, transition, and forward flight:
//!
//! 1. position PID produces a desired acceleration `u_d`;
//! 2. a constrained fit extracts collective thrust and pitch/roll from
//!    `u_d`, accounting for the wing force predicted at `alpha ≈ kappa + theta`;
//! 3. quaternion attitude P control runs on the lifting frame (pitch target
//!    shifted by the installation angle);
//! 4. a coordinated-turn yaw-rate feedforward blends in with airspeed;
//! 5. rate PID produces the lifting-frame moment demand.
//!
//! The output pair `(f_d, m_d)` goes to the control allocator. Attitude-step
//! setpoints bypass stages 1-2 for pitch/roll and keep a thrust-only
//! altitude hold, which is how the scripted transition maneuvers run.

use nalgebra::{Matrix3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::frames::{
    axis_angle_error, quat_error, rot_wind_to_body, sat, sat_vec, wrap_pi, EulerZxy,
};
use crate::sim::Measurement;
use crate::vehicle::{blended_lift_drag, AeroCoefficients, VehicleParams};

/// Position-loop PID gains (diagonal) and integrator clamp.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PositionGains {
    pub kp: [f64; 3],
    pub ki: [f64; 3],
    pub kd: [f64; 3],
    /// Integrator state clamp, m s.
    pub i_max: [f64; 3],
}

impl Default for PositionGains {
    fn default() -> Self {
        Self {
            kp: [2.0, 2.0, 4.0],
            ki: [0.4, 0.4, 0.4],
            kd: [3.0, 3.0, 5.0],
            i_max: [2.0, 2.0, 2.0],
        }
    }
}

/// Attitude- and rate-loop gains plus the airspeed blend window.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttitudeGains {
    pub k_att: [f64; 3],
    /// Angular-rate command limits, rad/s.
    pub omega_max: [f64; 3],
    pub k_rate_p: [f64; 3],
    pub k_rate_i: [f64; 3],
    pub k_rate_d: [f64; 3],
    /// Clamp on the integral term of the rate loop. The term enters before
    /// the inertia scaling, so the bound is in angular-acceleration units.
    pub m_i_max: [f64; 3],
    /// Moment demand limit, N m.
    pub m_max: [f64; 3],
    /// Coordinated-turn blend window, m/s.
    pub v_min: f64,
    pub v_max: f64,
}

impl Default for AttitudeGains {
    fn default() -> Self {
        Self {
            k_att: [6.0, 6.0, 3.0],
            omega_max: [3.0, 3.0, 2.0],
            k_rate_p: [8.0, 8.0, 4.0],
            k_rate_i: [2.0, 2.0, 2.0],
            k_rate_d: [0.02, 0.02, 0.02],
            m_i_max: [10.0, 10.0, 5.0],
            m_max: [4.0, 4.0, 1.5],
            v_min: 3.0,
            v_max: 12.0,
        }
    }
}

/// Controller configuration: gains plus the demand envelopes.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerConfig {
    pub position: PositionGains,
    pub attitude: AttitudeGains,
    /// Body-z thrust envelope upper edge, N (`cos(eta)` times the summed
    /// rotor thrust cap).
    pub f_max: f64,
    /// Pitch/roll search box half-width for the extraction, rad.
    pub tilt_max: f64,
    /// Horizontal speed below which the yaw setpoint holds, m/s.
    pub yaw_hold_speed: f64,
    /// Bank angle clamp in the coordinated-turn equation, rad.
    pub ct_bank_limit: f64,
    /// Low-pass cutoff of the rate-derivative filter, Hz.
    pub derivative_cutoff_hz: f64,
    /// Enable the coordinated-turn feedforward.
    pub coordinated_turn: bool,
    /// Evaluate the extraction with the desired yaw (false: measured yaw).
    pub extract_uses_desired_yaw: bool,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            position: PositionGains::default(),
            attitude: AttitudeGains::default(),
            f_max: 4.0 * 12.0 * 10.0_f64.to_radians().cos(),
            tilt_max: 50.0_f64.to_radians(),
            yaw_hold_speed: 0.5,
            ct_bank_limit: 60.0_f64.to_radians(),
            derivative_cutoff_hz: 20.0,
            coordinated_turn: true,
            extract_uses_desired_yaw: true,
        }
    }
}

/// Commanded reference for one control cycle.
#[derive(Debug, Clone, Copy)]
pub enum Setpoint {
    /// Twice-differentiable trajectory sample.
    Trajectory {
        position: Vector3<f64>,
        velocity: Vector3<f64>,
        acceleration: Vector3<f64>,
    },
    /// Scripted attitude command with altitude hold (earth z, down positive).
    AttitudeStep { roll: f64, pitch: f64, yaw: f64, hold_z: f64 },
}

/// Thrust magnitude along body -z plus the lifting-frame moment demand.
#[derive(Debug, Clone, Copy)]
pub struct ControlOutput {
    pub f_d: f64,
    pub m_d: Vector3<f64>,
}

/// Per-cycle telemetry of the internal pipeline.
#[derive(Debug, Clone, Copy)]
pub struct ControlDebug {
    pub u_d: Vector3<f64>,
    pub f_d: f64,
    pub roll_d: f64,
    pub pitch_d: f64,
    pub yaw_d: f64,
    pub omega_d: Vector3<f64>,
    pub m_d: Vector3<f64>,
    pub ct_weight: f64,
    pub extract_converged: bool,
    pub extract_saturated: bool,
}

/// Result of the thrust/attitude extraction.
#[derive(Debug, Clone, Copy)]
pub struct ExtractResult {
    pub f_d: f64,
    pub pitch_d: f64,
    pub roll_d: f64,
    pub residual: f64,
    pub converged: bool,
    pub saturated: bool,
}

/// Acceleration produced by thrust `f` along body -z plus the design-model
/// wing force at `alpha = kappa + pitch`, `beta = 0`, in the earth frame.
pub fn predicted_accel(
    f: f64,
    pitch: f64,
    roll: f64,
    yaw: f64,
    q_dyn: f64,
    params: &VehicleParams,
    coeffs: &AeroCoefficients,
) -> Vector3<f64> {
    let alpha = wrap_pi(params.kappa + pitch);
    let (cl, cd) = blended_lift_drag(alpha, coeffs);
    let qs = q_dyn * params.wing_area;
    let aero_body = qs
        * (rot_wind_to_body(params.kappa - alpha, 0.0) * Vector3::new(-cd, 0.0, -cl));
    let force_body = Vector3::new(0.0, 0.0, -f) + aero_body;
    (euler_matrix(roll, pitch, yaw) * force_body) / params.mass
}

fn euler_matrix(roll: f64, pitch: f64, yaw: f64) -> Matrix3<f64> {
    let (sr, cr) = roll.sin_cos();
    let (sp, cp) = pitch.sin_cos();
    let (sy, cy) = yaw.sin_cos();
    // Rz * Rx * Ry, expanded.
    Matrix3::new(
        cy * cp - sy * sr * sp,
        -sy * cr,
        cy * sp + sy * sr * cp,
        sy * cp + cy * sr * sp,
        cy * cr,
        sy * sp - cy * sr * cp,
        -cr * sp,
        sr,
        cr * cp,
    )
}

/// Aerodynamics-free closed-form extraction (exact when the dynamic pressure
/// is zero); seeds the constrained fit.
fn closed_form_seed(
    u_d: &Vector3<f64>,
    yaw: f64,
    params: &VehicleParams,
    f_max: f64,
    tilt_max: f64,
) -> (f64, f64, f64) {
    let force = params.mass * u_d;
    let (sy, cy) = yaw.sin_cos();
    let local = Vector3::new(
        cy * force.x + sy * force.y,
        -sy * force.x + cy * force.y,
        force.z,
    );
    let f = force.norm().clamp(0.0, f_max);
    if force.norm() < 1e-9 {
        return (f, 0.0, 0.0);
    }
    let roll = f64::atan2(local.y, -local.z);
    let pitch = f64::atan2(-local.x, local.y.hypot(local.z));
    (
        f,
        pitch.clamp(-tilt_max, tilt_max),
        roll.clamp(-tilt_max, tilt_max),
    )
}

/// Fit `(f_d, pitch_d, roll_d)` to the desired acceleration under box
/// constraints.
///
/// Projected, damped Gauss-Newton seeded from the aero-free closed form,
/// the previous solution when supplied, and an attached-flow seed (wing
/// near its best incidence). The force balance can have several exact
/// roots at speed — one wing-borne, one post-stall and thrust-heavy — so
/// residual ties within `TIE_TOL` resolve toward the smallest thrust.
/// Terminates on a 1e-8 projected-gradient norm or 50 iterations; the
/// returned point is never worse than the best seed, and non-convergence
/// falls back to best-so-far with a flag rather than aborting the flight
/// loop.
#[allow(clippy::too_many_arguments)]
pub fn extract_attitude_thrust(
    u_d: &Vector3<f64>,
    yaw: f64,
    airspeed: f64,
    params: &VehicleParams,
    coeffs: &AeroCoefficients,
    f_max: f64,
    tilt_max: f64,
    previous: Option<(f64, f64, f64)>,
) -> ExtractResult {
    /// Residual slack below which candidate solutions count as ties.
    const TIE_TOL: f64 = 1e-4;

    let q_dyn = 0.5 * params.rho * airspeed * airspeed;
    let lo = [0.0, -tilt_max, -tilt_max];
    let hi = [f_max, tilt_max, tilt_max];
    let clamp3 = |x: [f64; 3]| {
        [
            x[0].clamp(lo[0], hi[0]),
            x[1].clamp(lo[1], hi[1]),
            x[2].clamp(lo[2], hi[2]),
        ]
    };
    let resid = |x: &[f64; 3]| -> Vector3<f64> {
        predicted_accel(x[0], x[1], x[2], yaw, q_dyn, params, coeffs) - u_d
    };

    let seed0 = closed_form_seed(u_d, yaw, params, f_max, tilt_max);
    let mut seeds = vec![[seed0.0, seed0.1, seed0.2]];
    if let Some(p) = previous {
        seeds.push(clamp3([p.0, p.1, p.2]));
    }
    if q_dyn > 0.0 {
        // The wing force makes the landscape sharply multimodal in pitch
        // (through alpha) once dynamic pressure matters, while thrust and
        // roll reduce analytically at fixed pitch: `u` is linear in thrust,
        // and roll is a pure rotation in the yaw-frame (y, z) plane. Scan
        // pitch finely with the closed-form inner solution per node.
        for (x, _) in pitch_line_scan(u_d, yaw, q_dyn, params, coeffs, f_max, tilt_max, 3) {
            seeds.push(clamp3(x));
        }
    }
    // Candidate order matters only through the tie-break below.
    let mut candidates: Vec<([f64; 3], f64)> = Vec::with_capacity(seeds.len() * 2);
    let mut best = seeds[0];
    let mut best_norm = resid(&best).norm();
    let mut converged = false;

    for seed in &seeds {
        let mut x = *seed;
        let mut r = resid(&x);
        let mut r_norm = r.norm();
        candidates.push((x, r_norm));
        let mut lambda = 1e-6;
        for _iter in 0..50 {
            // Central-difference Jacobian of the 3-vector residual.
            let mut jac = Matrix3::<f64>::zeros();
            for col in 0..3 {
                let h = 1e-6 * (1.0 + x[col].abs());
                let mut xp = x;
                let mut xm = x;
                xp[col] += h;
                xm[col] -= h;
                let d = (resid(&xp) - resid(&xm)) / (2.0 * h);
                jac.set_column(col, &d);
            }
            let grad = jac.transpose() * r;
            // Projected gradient: ignore components pushing out of the box.
            let mut pg = grad;
            for i in 0..3 {
                if (x[i] <= lo[i] + 1e-12 && grad[i] > 0.0)
                    || (x[i] >= hi[i] - 1e-12 && grad[i] < 0.0)
                {
                    pg[i] = 0.0;
                }
            }
            if pg.norm() < 1e-8 {
                converged = true;
                break;
            }
            let mut improved = false;
            for _damp in 0..10 {
                let h = jac.transpose() * jac + Matrix3::identity() * lambda;
                let step = match h.cholesky() {
                    Some(ch) => ch.solve(&(-grad)),
                    None => -grad / (lambda.max(1e-9)),
                };
                let cand = clamp3([x[0] + step[0], x[1] + step[1], x[2] + step[2]]);
                let cr = resid(&cand);
                if cr.norm() < r_norm {
                    x = cand;
                    r = cr;
                    r_norm = cr.norm();
                    lambda = (lambda / 3.0).max(1e-12);
                    improved = true;
                    break;
                }
                lambda *= 10.0;
            }
            if !improved {
                // Stationary within the box for this seed.
                converged = converged || pg.norm() < 1e-6;
                break;
            }
        }
        candidates.push((x, r_norm));
    }

    for (x, n) in &candidates {
        if *n < best_norm {
            best = *x;
            best_norm = *n;
        }
    }
    // Tie-break between exact roots. Default to the branch that needs less
    // thrust; with a previous solution, switch away from its branch only for
    // a solid thrust saving so gust noise cannot flap between roots.
    let ties: Vec<&([f64; 3], f64)> =
        candidates.iter().filter(|(_, n)| *n <= best_norm + TIE_TOL).collect();
    match previous {
        Some((f_prev, _, _)) => {
            const SWITCH_MARGIN: f64 = 1.0;
            let mut incumbent = best;
            for (x, _) in &ties {
                if (x[0] - f_prev).abs() < (incumbent[0] - f_prev).abs() {
                    incumbent = *x;
                }
            }
            let mut challenger = incumbent;
            for (x, _) in &ties {
                if x[0] < challenger[0] {
                    challenger = *x;
                }
            }
            best = if incumbent[0] - challenger[0] > SWITCH_MARGIN {
                challenger
            } else {
                incumbent
            };
        }
        None => {
            for (x, _) in &ties {
                if x[0] < best[0] {
                    best = *x;
                }
            }
        }
    }
    best_norm = resid(&best).norm();

    let saturated = best[0] <= lo[0] + 1e-9
        || best[0] >= hi[0] - 1e-9
        || best[1].abs() >= tilt_max - 1e-9
        || best[2].abs() >= tilt_max - 1e-9;
    ExtractResult {
        f_d: best[0],
        pitch_d: best[1],
        roll_d: best[2],
        residual: best_norm,
        converged,
        saturated,
    }
}

/// Fine pitch scan with the inner (thrust, roll) subproblem reduced per
/// node: at fixed pitch the model acceleration in the yaw frame is
/// `Rx(roll) * (b - f * d)`, so the optimal roll aligns the (y, z)
/// components with the target and thrust remains a one-dimensional
/// minimization. Returns the best few `(thrust, pitch, roll)` starts with
/// their residuals.
#[allow(clippy::too_many_arguments)]
fn pitch_line_scan(
    u_d: &Vector3<f64>,
    yaw: f64,
    q_dyn: f64,
    params: &VehicleParams,
    coeffs: &AeroCoefficients,
    f_max: f64,
    tilt_max: f64,
    keep: usize,
) -> Vec<([f64; 3], f64)> {
    let (sy, cy) = yaw.sin_cos();
    // Target in the yaw-aligned frame.
    let u_loc = Vector3::new(
        cy * u_d.x + sy * u_d.y,
        -sy * u_d.x + cy * u_d.y,
        u_d.z,
    );
    let u_yz = u_loc.y.hypot(u_loc.z);

    let n = 900usize;
    let mut out: Vec<([f64; 3], f64)> = Vec::new();
    for i in 0..=n {
        let pitch = -tilt_max + 2.0 * tilt_max * i as f64 / n as f64;
        let alpha = wrap_pi(params.kappa + pitch);
        let (cl, cd) = blended_lift_drag(alpha, coeffs);
        let qs = q_dyn * params.wing_area;
        let aero_body =
            qs * (rot_wind_to_body(params.kappa - alpha, 0.0) * Vector3::new(-cd, 0.0, -cl));
        let (sp, cp) = pitch.sin_cos();
        // w(f) = b - f * d maps body force to the yaw frame before roll.
        let b_vec = Vector3::new(
            (cp * aero_body.x + sp * aero_body.z) / params.mass,
            aero_body.y / params.mass,
            (-sp * aero_body.x + cp * aero_body.z) / params.mass,
        );
        let d_vec = Vector3::new(sp / params.mass, 0.0, cp / params.mass);
        // With roll optimal, the residual depends on f through
        //   |w|^2 - 2 (w_x u_x + |w_yz| |u_yz|) + |u|^2.
        let cost = |f: f64| -> f64 {
            let w = b_vec - f * d_vec;
            let w_yz = w.y.hypot(w.z);
            (w.norm_squared() + u_loc.norm_squared()
                - 2.0 * (w.x * u_loc.x + w_yz * u_yz))
                .max(0.0)
        };
        let mut f_best = 0.0;
        let mut c_best = cost(0.0);
        let m = 32;
        for k in 1..=m {
            let f = f_max * k as f64 / m as f64;
            let c = cost(f);
            if c < c_best {
                c_best = c;
                f_best = f;
            }
        }
        // Golden-section polish around the sampled minimum.
        let (mut a, mut b) = (
            (f_best - f_max / m as f64).max(0.0),
            (f_best + f_max / m as f64).min(f_max),
        );
        for _ in 0..24 {
            let g1 = a + 0.381_966_011_250_105 * (b - a);
            let g2 = b - 0.381_966_011_250_105 * (b - a);
            if cost(g1) < cost(g2) {
                b = g2;
            } else {
                a = g1;
            }
        }
        let f = 0.5 * (a + b);
        let w = b_vec - f * d_vec;
        let roll =
            wrap_pi(f64::atan2(u_loc.z, u_loc.y) - f64::atan2(w.z, w.y)).clamp(-tilt_max, tilt_max);
        // Evaluate at the (possibly clamped) roll.
        let (sr, cr) = roll.sin_cos();
        let rotated = Vector3::new(w.x, cr * w.y - sr * w.z, sr * w.y + cr * w.z);
        let residual = (rotated - u_loc).norm();
        out.push(([f, pitch, roll], residual));
    }
    out.sort_by(|a, b| a.1.total_cmp(&b.1));
    out.truncate(keep);
    out
}

/// Thrust that matches the vertical acceleration demand at a fixed attitude.
///
/// Used by attitude-step setpoints: the stepped pitch/roll are not free
/// variables, so altitude hold reduces to a scalar solve, clamped to the
/// thrust envelope.
pub fn thrust_for_vertical(
    u_dz: f64,
    roll: f64,
    pitch: f64,
    yaw: f64,
    airspeed: f64,
    params: &VehicleParams,
    coeffs: &AeroCoefficients,
    f_max: f64,
) -> (f64, bool) {
    let q_dyn = 0.5 * params.rho * airspeed * airspeed;
    let aero_z = predicted_accel(0.0, pitch, roll, yaw, q_dyn, params, coeffs).z * params.mass;
    let r33 = roll.cos() * pitch.cos();
    if r33.abs() < 0.05 {
        // Thrust has no vertical authority at this attitude.
        return (0.0, true);
    }
    let f = (aero_z - params.mass * u_dz) / r33;
    let clamped = f.clamp(0.0, f_max);
    (clamped, (clamped - f).abs() > 1e-12)
}

/// Yaw-rate feedforward of a coordinated (zero-sideslip) turn.
///
/// `roll`/`pitch` are the lifting-frame attitude; the bank angle is clamped
/// before the tangent. Returns zero at vanishing airspeed (the blend weight
/// is zero there anyway).
pub fn coordinated_turn(
    roll: f64,
    pitch: f64,
    airspeed: f64,
    gravity: f64,
    bank_limit: f64,
) -> f64 {
    if airspeed < 1e-6 {
        return 0.0;
    }
    let bank = roll.clamp(-bank_limit, bank_limit);
    let psi_dot = gravity * bank.tan() / airspeed;
    psi_dot * pitch.cos() * bank.cos()
}

/// Airspeed blend weight and rate-command synthesis: the yaw channel picks
/// up the coordinated-turn rate as airspeed grows from `v_min` to `v_max`.
pub fn synthesize_rates(
    omega_ac: &Vector3<f64>,
    omega_ct: f64,
    airspeed: f64,
    v_min: f64,
    v_max: f64,
) -> (Vector3<f64>, f64) {
    let w = sat((airspeed - v_min) / (v_max - v_min), 0.0, 1.0);
    (
        Vector3::new(omega_ac.x, omega_ac.y, omega_ac.z + w * omega_ct),
        w,
    )
}

/// Stateful full-envelope controller instance.
#[derive(Debug, Clone)]
pub struct Controller {
    pub cfg: ControllerConfig,
    inertia: Matrix3<f64>,
    gravity: f64,
    q_install: UnitQuaternion<f64>,
    pos_integral: Vector3<f64>,
    rate_integral: Vector3<f64>,
    yaw_d: Option<f64>,
    omega_prev: Option<Vector3<f64>>,
    omega_dot_filt: Vector3<f64>,
    extract_prev: Option<(f64, f64, f64)>,
    thrust_sat_dir: i8,
    moment_sat_dir: [i8; 3],
}

impl Controller {
    pub fn new(cfg: ControllerConfig, params: &VehicleParams) -> Self {
        Self {
            cfg,
            inertia: params.inertia(),
            gravity: params.gravity,
            q_install: UnitQuaternion::from_axis_angle(&Vector3::y_axis(), params.kappa),
            pos_integral: Vector3::zeros(),
            rate_integral: Vector3::zeros(),
            yaw_d: None,
            omega_prev: None,
            omega_dot_filt: Vector3::zeros(),
            extract_prev: None,
            thrust_sat_dir: 0,
            moment_sat_dir: [0; 3],
        }
    }

    pub fn reset(&mut self) {
        self.pos_integral = Vector3::zeros();
        self.rate_integral = Vector3::zeros();
        self.yaw_d = None;
        self.omega_prev = None;
        self.omega_dot_filt = Vector3::zeros();
        self.extract_prev = None;
        self.thrust_sat_dir = 0;
        self.moment_sat_dir = [0; 3];
    }

    /// One control cycle at period `dt`.
    pub fn update(
        &mut self,
        meas: &Measurement,
        setpoint: &Setpoint,
        params: &VehicleParams,
        coeffs: &AeroCoefficients,
        dt: f64,
    ) -> (ControlOutput, ControlDebug) {
        let (u_d, f_d, roll_d, pitch_d, yaw_d, converged, saturated) =
            match setpoint {
                Setpoint::Trajectory { position, velocity, acceleration } => {
                    let u_d = self.position_control(meas, position, velocity, acceleration, dt);
                    let yaw_d = self.desired_yaw(meas);
                    let yaw_for_extract = if self.cfg.extract_uses_desired_yaw {
                        yaw_d
                    } else {
                        EulerZxy::from_quaternion(&meas.attitude).yaw
                    };
                    let ext = extract_attitude_thrust(
                        &u_d,
                        yaw_for_extract,
                        meas.air.speed,
                        params,
                        coeffs,
                        self.cfg.f_max,
                        self.cfg.tilt_max,
                        self.extract_prev,
                    );
                    self.extract_prev = Some((ext.f_d, ext.pitch_d, ext.roll_d));
                    self.thrust_sat_dir = if ext.f_d >= self.cfg.f_max - 1e-9 {
                        1
                    } else if ext.f_d <= 1e-9 {
                        -1
                    } else {
                        0
                    };
                    (u_d, ext.f_d, ext.roll_d, ext.pitch_d, yaw_d, ext.converged, ext.saturated)
                }
                Setpoint::AttitudeStep { roll, pitch, yaw, hold_z } => {
                    let u_dz = self.altitude_control(meas, *hold_z, dt);
                    let (f, sat_f) = thrust_for_vertical(
                        u_dz,
                        *roll,
                        *pitch,
                        *yaw,
                        meas.air.speed,
                        params,
                        coeffs,
                        self.cfg.f_max,
                    );
                    self.thrust_sat_dir = if sat_f { 1 } else { 0 };
                    self.yaw_d = Some(*yaw);
                    (
                        Vector3::new(0.0, 0.0, u_dz),
                        f,
                        *roll,
                        *pitch,
                        *yaw,
                        true,
                        sat_f,
                    )
                }
            };

        // Attitude control runs on the lifting frame: pitch shifted by kappa.
        let q_lifting = meas.attitude * self.q_install;
        let target = EulerZxy::new(roll_d, pitch_d + params.kappa, yaw_d);
        let q_err = quat_error(&q_lifting, &target.to_quaternion());
        let xi = axis_angle_error(&q_err);
        let k = &self.cfg.attitude.k_att;
        let omega_lim = Vector3::from(self.cfg.attitude.omega_max);
        let omega_ac = sat_vec(
            &Vector3::new(k[0] * xi.x, k[1] * xi.y, k[2] * xi.z),
            &(-omega_lim),
            &omega_lim,
        );

        let lifting_euler = EulerZxy::from_quaternion(&q_lifting);
        let omega_ct = if self.cfg.coordinated_turn {
            coordinated_turn(
                lifting_euler.roll,
                lifting_euler.pitch,
                meas.air.speed,
                params.gravity,
                self.cfg.ct_bank_limit,
            )
        } else {
            0.0
        };
        let (omega_d, ct_weight) = synthesize_rates(
            &omega_ac,
            omega_ct,
            meas.air.speed,
            self.cfg.attitude.v_min,
            self.cfg.attitude.v_max,
        );

        let m_d = self.rate_control(&meas.omega_lifting, &omega_d, dt);
        let out = ControlOutput { f_d, m_d };
        let dbg = ControlDebug {
            u_d,
            f_d,
            roll_d,
            pitch_d,
            yaw_d,
            omega_d,
            m_d,
            ct_weight,
            extract_converged: converged,
            extract_saturated: saturated,
        };
        (out, dbg)
    }

    fn position_control(
        &mut self,
        meas: &Measurement,
        p_d: &Vector3<f64>,
        v_d: &Vector3<f64>,
        a_d: &Vector3<f64>,
        dt: f64,
    ) -> Vector3<f64> {
        let g = &self.cfg.position;
        let e = meas.position - p_d;
        let ev = meas.velocity - v_d;
        // Clamping anti-windup; the z axis also freezes while thrust is
        // saturated in the direction the error keeps pushing.
        for i in 0..3 {
            let frozen = i == 2
                && ((self.thrust_sat_dir > 0 && e.z > 0.0)
                    || (self.thrust_sat_dir < 0 && e.z < 0.0));
            if !frozen {
                self.pos_integral[i] =
                    (self.pos_integral[i] + e[i] * dt).clamp(-g.i_max[i], g.i_max[i]);
            }
        }
        Vector3::new(
            a_d.x - g.kd[0] * ev.x - g.kp[0] * e.x - g.ki[0] * self.pos_integral.x,
            a_d.y - g.kd[1] * ev.y - g.kp[1] * e.y - g.ki[1] * self.pos_integral.y,
            -self.gravity + a_d.z
                - g.kd[2] * ev.z
                - g.kp[2] * e.z
                - g.ki[2] * self.pos_integral.z,
        )
    }

    fn altitude_control(&mut self, meas: &Measurement, z_d: f64, dt: f64) -> f64 {
        let g = &self.cfg.position;
        let e = meas.position.z - z_d;
        let frozen = (self.thrust_sat_dir > 0 && e > 0.0) || (self.thrust_sat_dir < 0 && e < 0.0);
        if !frozen {
            self.pos_integral.z = (self.pos_integral.z + e * dt).clamp(-g.i_max[2], g.i_max[2]);
        }
        -self.gravity - g.kd[2] * meas.velocity.z - g.kp[2] * e
            - g.ki[2] * self.pos_integral.z
    }

    fn desired_yaw(&mut self, meas: &Measurement) -> f64 {
        let h = meas.velocity.x.hypot(meas.velocity.y);
        if h >= self.cfg.yaw_hold_speed {
            let psi = f64::atan2(meas.velocity.y, meas.velocity.x);
            self.yaw_d = Some(psi);
            psi
        } else {
            *self
                .yaw_d
                .get_or_insert_with(|| EulerZxy::from_quaternion(&meas.attitude).yaw)
        }
    }

    fn rate_control(&mut self, omega: &Vector3<f64>, omega_d: &Vector3<f64>, dt: f64) -> Vector3<f64> {
        let g = &self.cfg.attitude;
        let e = omega - omega_d;

        // Filtered angular acceleration (the rate-setpoint derivative is
        // taken as zero).
        let raw = match self.omega_prev {
            Some(prev) => (omega - prev) / dt,
            None => Vector3::zeros(),
        };
        self.omega_prev = Some(*omega);
        let alpha = dt / (dt + 1.0 / (2.0 * std::f64::consts::PI * self.cfg.derivative_cutoff_hz));
        self.omega_dot_filt += alpha * (raw - self.omega_dot_filt);

        let mut m_i = Vector3::zeros();
        for i in 0..3 {
            let frozen = (self.moment_sat_dir[i] > 0 && e[i] < 0.0)
                || (self.moment_sat_dir[i] < 0 && e[i] > 0.0);
            if !frozen {
                self.rate_integral[i] += e[i] * dt;
            }
            m_i[i] = sat(g.k_rate_i[i] * self.rate_integral[i], -g.m_i_max[i], g.m_i_max[i]);
            // Keep the stored integral consistent with its clamp.
            if g.k_rate_i[i] > 0.0 {
                self.rate_integral[i] = self.rate_integral[i]
                    .clamp(-g.m_i_max[i] / g.k_rate_i[i], g.m_i_max[i] / g.k_rate_i[i]);
            }
        }

        let body = self.inertia
            * Vector3::new(
                -g.k_rate_p[0] * e.x - m_i.x - g.k_rate_d[0] * self.omega_dot_filt.x,
                -g.k_rate_p[1] * e.y - m_i.y - g.k_rate_d[1] * self.omega_dot_filt.y,
                -g.k_rate_p[2] * e.z - m_i.z - g.k_rate_d[2] * self.omega_dot_filt.z,
            );
        let lim = Vector3::from(g.m_max);
        let m_d = sat_vec(&body, &(-lim), &lim);
        for i in 0..3 {
            self.moment_sat_dir[i] = if m_d[i] >= lim[i] - 1e-12 {
                1
            } else if m_d[i] <= -lim[i] + 1e-12 {
                -1
            } else {
                0
            };
        }
        m_d
    }
}
