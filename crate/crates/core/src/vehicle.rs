//! Physical model of the lifting-wing quadcopter: structure parameters, the
//! tilted-rotor force/moment map, full-envelope aerodynamics with stall
//! blending, aileron mixing, first-order actuator lag, and total wrench
//! assembly.
//!
//! Forces are expressed in the body frame, moments in the lifting frame;
//! that split matches where the downstream controller and allocator work.

use nalgebra::{Matrix3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::frames::{rot_body_to_earth, rot_lifting_to_body, rot_wind_to_body};

/// Structure parameters and physical constants.
///
/// Defaults describe the reference airframe; everything is overridable from
/// the parameter file. Angles are radians, SI units throughout.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VehicleParams {
    /// Aircraft mass, kg.
    pub mass: f64,
    /// Installation angle of the lifting wing, rad.
    pub kappa: f64,
    /// Lateral installation angle of the motors, rad.
    pub eta: f64,
    /// Longitudinal distance from the CoG to a propeller, m.
    pub d_x: f64,
    /// Lateral distance from the CoG to a propeller, m.
    pub d_y: f64,
    /// Principal moments of inertia, kg m^2 (lifting frame).
    pub j_x: f64,
    pub j_y: f64,
    pub j_z: f64,
    /// Cross product of inertia J_xz, kg m^2.
    pub j_xz: f64,
    /// Wingspan, m.
    pub wingspan: f64,
    /// Mean chord, m.
    pub chord: f64,
    /// Aerodynamic reference area of the wing, m^2.
    ///
    /// Effective area of the coefficient set, not the planform b*c; tuned so
    /// the stock coefficient set reproduces the reference flight envelope.
    pub wing_area: f64,
    /// Rotor thrust coefficient, N s^2.
    pub k_f: f64,
    /// Rotor drag-torque coefficient, N m s^2.
    pub k_m: f64,
    /// Air density, kg/m^3.
    pub rho: f64,
    /// Gravitational acceleration, m/s^2.
    pub gravity: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            mass: 1.92,
            kappa: 34.0_f64.to_radians(),
            eta: 10.0_f64.to_radians(),
            d_x: 0.25,
            d_y: 0.2125,
            j_x: 5.12e-2,
            j_y: 5.54e-2,
            j_z: 7.6e-2,
            j_xz: 0.0,
            wingspan: 0.94,
            chord: 0.17,
            wing_area: 0.085,
            k_f: 2.824e-5,
            k_m: 5.875e-7,
            rho: 1.225,
            gravity: 9.81,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("mass", self.mass),
            ("k_f", self.k_f),
            ("k_m", self.k_m),
            ("wing_area", self.wing_area),
            ("wingspan", self.wingspan),
            ("chord", self.chord),
            ("rho", self.rho),
            ("gravity", self.gravity),
            ("j_x", self.j_x),
            ("j_y", self.j_y),
            ("j_z", self.j_z),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(ConfigError::new(format!("{name} must be positive, got {v}")));
            }
        }
        if self.inertia().determinant() <= 0.0 {
            return Err(ConfigError::new("inertia matrix must be positive definite"));
        }
        Ok(())
    }

    /// Inertia matrix in the lifting frame.
    pub fn inertia(&self) -> Matrix3<f64> {
        Matrix3::new(
            self.j_x, 0.0, -self.j_xz, //
            0.0, self.j_y, 0.0, //
            -self.j_xz, 0.0, self.j_z,
        )
    }

    /// Reaction-torque/tilt yaw coefficient `K1 = K_m/K_f + d_x sin(eta)`.
    pub fn k1(&self) -> f64 {
        self.k_m / self.k_f + self.d_x * self.eta.sin()
    }

    /// Cached lifting-to-body rotation.
    pub fn r_lifting_to_body(&self) -> Matrix3<f64> {
        rot_lifting_to_body(self.kappa)
    }

    /// Per-rotor thrust that balances gravity at level attitude.
    pub fn hover_thrust_per_rotor(&self) -> f64 {
        self.mass * self.gravity / (4.0 * self.eta.cos())
    }
}

/// Aerodynamic coefficient set: the stall-blended lift/drag model plus
/// low-order static and control derivatives.
///
/// The blended `C_L`/`C_D` pair covers the full angle-of-attack range.
/// Static moment and side-force coefficients are linear in their argument;
/// rate-damping derivatives exist but default to off.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AeroCoefficients {
    /// Zero-lift drag.
    pub c0: f64,
    /// Flat-plate (post-stall) lift scale.
    pub c1: f64,
    /// Attached-flow lift slope parameter.
    pub c2: f64,
    /// Attached-flow shape parameter.
    pub c3: f64,
    /// Blend center, rad.
    pub alpha0: f64,
    /// Lift blend sharpness.
    pub k_l: f64,
    /// Drag blend sharpness.
    pub k_d: f64,

    /// Pitch moment at zero alpha.
    pub c_m0: f64,
    /// Pitch moment slope, 1/rad.
    pub c_m_alpha: f64,
    /// Side force per sideslip, 1/rad.
    pub c_y_beta: f64,
    /// Roll moment per sideslip, 1/rad.
    pub c_roll_beta: f64,
    /// Yaw moment per sideslip, 1/rad.
    pub c_n_beta: f64,

    /// Lift per elevator deflection, 1/rad.
    pub c_l_delta_e: f64,
    /// Drag per elevator deflection, 1/rad.
    pub c_d_delta_e: f64,
    /// Pitch moment per elevator deflection, 1/rad.
    pub c_m_delta_e: f64,
    /// Side force per aileron deflection, 1/rad.
    pub c_y_delta_a: f64,
    /// Roll moment per aileron deflection, 1/rad.
    pub c_roll_delta_a: f64,
    /// Yaw moment per aileron deflection, 1/rad.
    pub c_n_delta_a: f64,

    /// Roll damping (used only with `rate_damping`).
    pub c_roll_p: f64,
    /// Pitch damping (used only with `rate_damping`).
    pub c_m_q: f64,
    /// Yaw damping (used only with `rate_damping`).
    pub c_n_r: f64,
    /// Enable angular-rate damping terms. Off keeps the static model.
    pub rate_damping: bool,
}

impl Default for AeroCoefficients {
    fn default() -> Self {
        Self {
            c0: 0.055,
            c1: 0.9,
            c2: 13.0,
            c3: 3.3,
            alpha0: 3.0_f64.to_radians(),
            k_l: 38.0,
            k_d: 48.0,
            c_m0: 0.0,
            c_m_alpha: -0.01,
            c_y_beta: -0.2,
            c_roll_beta: -0.25,
            c_n_beta: 0.02,
            c_l_delta_e: 0.05,
            c_d_delta_e: 0.03,
            c_m_delta_e: -0.25,
            c_y_delta_a: -0.03,
            c_roll_delta_a: 0.15,
            c_n_delta_a: -0.008,
            c_roll_p: -0.45,
            c_m_q: -1.0,
            c_n_r: -0.06,
            rate_damping: false,
        }
    }
}

impl AeroCoefficients {
    pub fn validate(&self) -> Result<(), ConfigError> {
        // Denominator of the attached-flow branch must stay positive.
        let dmin = (self.c2 - self.c3).min(0.0) + self.c3;
        if dmin <= 0.0 {
            return Err(ConfigError::new(
                "attached-flow denominator (c2-c3)cos^2(a)+c3 must stay positive",
            ));
        }
        if self.k_l <= 0.0 || self.k_d <= 0.0 {
            return Err(ConfigError::new("blend sharpness k_l, k_d must be positive"));
        }
        Ok(())
    }
}

/// Smooth 0..1 weight that is ~1 inside `|alpha| < alpha0` and decays beyond.
pub fn pseudo_sigmoid(alpha0: f64, k: f64, alpha: f64) -> f64 {
    let a0sq = k * alpha0 * alpha0;
    (1.0 + (a0sq - k * alpha * alpha).tanh()) / (1.0 + a0sq.tanh())
}

/// Blended lift and drag coefficients over the full angle-of-attack range.
///
/// The attached-flow branch models the pre-stall wing, the flat-plate branch
/// the post-stall regime; a pseudo-sigmoid in `alpha^2` blends them.
pub fn blended_lift_drag(alpha: f64, c: &AeroCoefficients) -> (f64, f64) {
    let cos2 = alpha.cos() * alpha.cos();
    let denom = (c.c2 - c.c3) * cos2 + c.c3;
    let sin2a = (2.0 * alpha).sin();
    let sin_sq = alpha.sin() * alpha.sin();

    let cl_s = 0.5 * c.c2 * c.c2 * sin2a / denom;
    let cd_s = c.c0 + c.c2 * c.c3 * sin_sq / denom;
    let cl_l = c.c1 * sin2a;
    let cd_l = c.c0 + 2.0 * c.c1 * sin_sq;

    let s_l = pseudo_sigmoid(c.alpha0, c.k_l, alpha);
    let s_d = pseudo_sigmoid(c.alpha0, c.k_d, alpha);
    (cl_s * s_l + cl_l * (1.0 - s_l), cd_s * s_d + cd_l * (1.0 - s_d))
}

/// Thrust of one rotor at angular rate `w` (rad/s).
pub fn rotor_thrust(w: f64, params: &VehicleParams) -> f64 {
    debug_assert!(w >= 0.0, "rotor speed must be nonnegative");
    params.k_f * w * w
}

/// Reaction torque of one rotor at angular rate `w` (rad/s).
pub fn rotor_torque(w: f64, params: &VehicleParams) -> f64 {
    debug_assert!(w >= 0.0, "rotor speed must be nonnegative");
    params.k_m * w * w
}

/// Body-frame force and moment components produced by the four tilted rotors.
///
/// `f_rx` is identically zero: the motor tilt is purely lateral. Returns
/// `(f_ry, f_rz, m_r)` with the moment still in the body frame.
pub fn rotor_wrench(thrust: &[f64; 4], params: &VehicleParams) -> (f64, f64, Vector3<f64>) {
    let (se, ce) = params.eta.sin_cos();
    let k1 = params.k1();
    let [t1, t2, t3, t4] = *thrust;
    let f_ry = se * (t1 - t2 - t3 + t4);
    let f_rz = -ce * (t1 + t2 + t3 + t4);
    let m_rx = params.d_y * ce * (-t1 + t2 + t3 - t4);
    let m_ry = params.d_x * ce * (t1 - t2 + t3 - t4);
    let m_rz = k1 * (t1 + t2 - t3 - t4);
    (f_ry, f_rz, Vector3::new(m_rx, m_ry, m_rz))
}

/// Airspeed vector and aerodynamic angles in the lifting frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AirData {
    /// Airspeed vector in the lifting frame, m/s.
    pub v_lifting: Vector3<f64>,
    /// Airspeed magnitude, m/s.
    pub speed: f64,
    /// Angle of attack, rad.
    pub alpha: f64,
    /// Sideslip angle, rad.
    pub beta: f64,
}

impl AirData {
    pub fn still() -> Self {
        Self { v_lifting: Vector3::zeros(), speed: 0.0, alpha: 0.0, beta: 0.0 }
    }

    /// Dynamic pressure `Q = rho V^2 / 2`.
    pub fn dynamic_pressure(&self, rho: f64) -> f64 {
        0.5 * rho * self.speed * self.speed
    }
}

/// Airspeed threshold below which alpha and beta are zeroed by convention.
pub const AIRSPEED_EPS: f64 = 1e-6;

/// Resolve earth-frame velocity and wind into lifting-frame air data.
///
/// Below [`AIRSPEED_EPS`] the aerodynamic angles are zero by convention; the
/// vanishing dynamic pressure kills the wrench regardless.
pub fn relative_airspeed(
    v_earth: &Vector3<f64>,
    q: &UnitQuaternion<f64>,
    wind_earth: &Vector3<f64>,
    params: &VehicleParams,
) -> AirData {
    let v_air_body = rot_body_to_earth(q).transpose() * (v_earth - wind_earth);
    let v_lifting = params.r_lifting_to_body().transpose() * v_air_body;
    let speed = v_lifting.norm();
    if speed < AIRSPEED_EPS {
        return AirData { v_lifting, speed, alpha: 0.0, beta: 0.0 };
    }
    let alpha = f64::atan2(v_lifting.z, v_lifting.x);
    let beta = (v_lifting.y / speed).clamp(-1.0, 1.0).asin();
    AirData { v_lifting, speed, alpha, beta }
}

/// Elevator/aileron mix of the two elevon deflections:
/// `delta_e = dar + dal`, `delta_a = dal - dar`.
pub fn aileron_mix(delta_ar: f64, delta_al: f64) -> (f64, f64) {
    (delta_ar + delta_al, delta_al - delta_ar)
}

/// Force (body frame) and moment (lifting frame) bundle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wrench {
    pub force: Vector3<f64>,
    pub moment: Vector3<f64>,
}

impl Wrench {
    pub fn zero() -> Self {
        Self { force: Vector3::zeros(), moment: Vector3::zeros() }
    }

    pub fn is_finite(&self) -> bool {
        self.force.iter().chain(self.moment.iter()).all(|v| v.is_finite())
    }
}

/// Static moment coefficients at the current flight condition, before
/// control-surface contributions. Rate damping enters only when enabled.
pub fn static_moment_coefficients(
    air: &AirData,
    omega_lifting: &Vector3<f64>,
    c: &AeroCoefficients,
    params: &VehicleParams,
) -> (f64, f64, f64) {
    let mut c_roll = c.c_roll_beta * air.beta;
    let mut c_m = c.c_m0 + c.c_m_alpha * air.alpha;
    let mut c_n = c.c_n_beta * air.beta;
    if c.rate_damping && air.speed > AIRSPEED_EPS {
        let half_b = 0.5 * params.wingspan / air.speed;
        let half_c = 0.5 * params.chord / air.speed;
        c_roll += c.c_roll_p * half_b * omega_lifting.x;
        c_m += c.c_m_q * half_c * omega_lifting.y;
        c_n += c.c_n_r * half_b * omega_lifting.z;
    }
    (c_roll, c_m, c_n)
}

/// Aerodynamic wrench of the wing and elevons.
///
/// Wind-frame forces rotate into the body frame through the tilt angle
/// `kappa - alpha`; moments are produced directly in the lifting frame.
#[allow(clippy::too_many_arguments)]
pub fn aero_wrench(
    air: &AirData,
    omega_lifting: &Vector3<f64>,
    delta_e: f64,
    delta_a: f64,
    c: &AeroCoefficients,
    params: &VehicleParams,
) -> Wrench {
    let q_dyn = air.dynamic_pressure(params.rho);
    if q_dyn == 0.0 {
        return Wrench::zero();
    }
    let qs = q_dyn * params.wing_area;
    let (c_lift, c_drag) = blended_lift_drag(air.alpha, c);
    let (c_roll, c_m, c_n) = static_moment_coefficients(air, omega_lifting, c, params);

    let wind_force = Vector3::new(
        -(c_drag + c.c_d_delta_e * delta_e),
        c.c_y_beta * air.beta + c.c_y_delta_a * delta_a,
        -(c_lift + c.c_l_delta_e * delta_e),
    );
    let force = qs * rot_wind_to_body(params.kappa - air.alpha, air.beta) * wind_force;
    let moment = qs
        * Vector3::new(
            params.wingspan * (c_roll + c.c_roll_delta_a * delta_a),
            params.chord * (c_m + c.c_m_delta_e * delta_e),
            params.wingspan * (c_n + c.c_n_delta_a * delta_a),
        );
    Wrench { force, moment }
}

/// First-order actuator constants: motors and elevon servos.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActuatorModel {
    /// Motor time constant, s.
    pub t_motor: f64,
    /// Servo time constant, s.
    pub t_servo: f64,
    /// Motor speed per unit throttle, rad/s.
    pub motor_gain: f64,
    /// Motor idle speed at zero throttle, rad/s.
    pub motor_bias: f64,
    /// Servo deflection per unit signed command, rad.
    pub servo_gain: f64,
    /// Servo deflection bias, rad.
    pub servo_bias: f64,
}

impl Default for ActuatorModel {
    fn default() -> Self {
        Self {
            t_motor: 0.05,
            t_servo: 0.05,
            motor_gain: 586.9,
            motor_bias: 65.0,
            servo_gain: 25.0_f64.to_radians(),
            servo_bias: 0.0,
        }
    }
}

impl ActuatorModel {
    /// Largest steady-state thrust one motor can produce.
    pub fn max_thrust(&self, params: &VehicleParams) -> f64 {
        let w = self.motor_gain + self.motor_bias;
        params.k_f * w * w
    }

    /// Steady-state thrust at zero throttle.
    pub fn idle_thrust(&self, params: &VehicleParams) -> f64 {
        params.k_f * self.motor_bias * self.motor_bias
    }

    /// Throttle command that holds thrust `t` in steady state, clamped to [0, 1].
    pub fn throttle_for_thrust(&self, t: f64, params: &VehicleParams) -> f64 {
        let w = (t.max(0.0) / params.k_f).sqrt();
        ((w - self.motor_bias) / self.motor_gain).clamp(0.0, 1.0)
    }

    /// Unit command in [0, 1] that holds deflection `d` in steady state.
    pub fn command_for_deflection(&self, d: f64) -> f64 {
        (((d - self.servo_bias) / self.servo_gain) * 0.5 + 0.5).clamp(0.0, 1.0)
    }
}

/// Rotor speeds and elevon deflections.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActuatorState {
    /// Rotor angular rates, rad/s.
    pub rotor_speed: [f64; 4],
    /// Right and left elevon deflections, rad.
    pub aileron: [f64; 2],
}

impl ActuatorState {
    /// Steady state for the given throttle/servo commands.
    pub fn steady(commands: &[f64; 6], model: &ActuatorModel) -> Self {
        let mut s = Self { rotor_speed: [0.0; 4], aileron: [0.0; 2] };
        for i in 0..4 {
            s.rotor_speed[i] = model.motor_gain * commands[i] + model.motor_bias;
        }
        for j in 0..2 {
            s.aileron[j] = model.servo_gain * (2.0 * commands[4 + j] - 1.0) + model.servo_bias;
        }
        s
    }

    /// Rotor thrusts for the current speeds.
    pub fn thrusts(&self, params: &VehicleParams) -> [f64; 4] {
        let mut t = [0.0; 4];
        for i in 0..4 {
            t[i] = rotor_thrust(self.rotor_speed[i], params);
        }
        t
    }

    /// Exact first-order-lag response after `dt` under constant commands.
    ///
    /// Commands are unit throttles in [0, 1]; servo commands map to signed
    /// deflection through `2 sigma - 1`. The update `x <- u + (x-u) e^(-dt/T)`
    /// is the exact discretization, so it is step-size independent.
    pub fn step(&self, commands: &[f64; 6], model: &ActuatorModel, dt: f64) -> Self {
        debug_assert!(dt > 0.0, "actuator step requires dt > 0");
        let km = (-dt / model.t_motor).exp();
        let ka = (-dt / model.t_servo).exp();
        let mut next = *self;
        for i in 0..4 {
            let sigma = commands[i].clamp(0.0, 1.0);
            let target = model.motor_gain * sigma + model.motor_bias;
            next.rotor_speed[i] = (target + (self.rotor_speed[i] - target) * km).max(0.0);
        }
        for j in 0..2 {
            let sigma = commands[4 + j].clamp(0.0, 1.0);
            let target = model.servo_gain * (2.0 * sigma - 1.0) + model.servo_bias;
            next.aileron[j] = target + (self.aileron[j] - target) * ka;
        }
        next
    }
}

/// Total external wrench: rotors, aerodynamics, and gravity.
pub fn total_wrench(
    q: &UnitQuaternion<f64>,
    v_earth: &Vector3<f64>,
    omega_lifting: &Vector3<f64>,
    actuators: &ActuatorState,
    wind_earth: &Vector3<f64>,
    params: &VehicleParams,
    coeffs: &AeroCoefficients,
) -> Wrench {
    let thrusts = actuators.thrusts(params);
    let (f_ry, f_rz, m_rotor_body) = rotor_wrench(&thrusts, params);
    let (delta_e, delta_a) = aileron_mix(actuators.aileron[0], actuators.aileron[1]);
    let air = relative_airspeed(v_earth, q, wind_earth, params);
    let aero = aero_wrench(&air, omega_lifting, delta_e, delta_a, coeffs, params);

    let gravity_body = rot_body_to_earth(q).transpose()
        * Vector3::new(0.0, 0.0, params.mass * params.gravity);
    let force = Vector3::new(0.0, f_ry, f_rz) + aero.force + gravity_body;
    let moment = params.r_lifting_to_body().transpose() * m_rotor_body + aero.moment;
    Wrench { force, moment }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::Vector3;

    fn params() -> VehicleParams {
        VehicleParams::default()
    }

    #[test]
    fn rotor_thrust_and_torque() {
        let p = params();
        assert_eq!(rotor_thrust(0.0, &p), 0.0);
        // Hover speed for the stock airframe.
        let t_hover = p.hover_thrust_per_rotor();
        let w = (t_hover / p.k_f).sqrt();
        assert_abs_diff_eq!(rotor_thrust(w, &p), t_hover, epsilon = 1e-12);
        assert_abs_diff_eq!(
            rotor_torque(w, &p),
            p.k_m / p.k_f * t_hover,
            epsilon = 1e-12
        );
        // Table coefficients give ~0.0996 N m at the hover thrust.
        assert_abs_diff_eq!(p.k_m / p.k_f * 4.785, 0.0996, epsilon = 5e-4);
    }

    #[test]
    fn rotor_wrench_symmetric_hover() {
        let p = params();
        let t = 3.7;
        let (f_ry, f_rz, m) = rotor_wrench(&[t, t, t, t], &p);
        assert_abs_diff_eq!(f_ry, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(f_rz, -4.0 * t * p.eta.cos(), epsilon = 1e-12);
        assert!(m.norm() < 1e-15);
    }

    #[test]
    fn rotor_wrench_single_rotor() {
        let p = params();
        let (f_ry, _, m) = rotor_wrench(&[1.0, 0.0, 0.0, 0.0], &p);
        assert_abs_diff_eq!(f_ry, 10.0_f64.to_radians().sin(), epsilon = 1e-12);
        assert_abs_diff_eq!(m.x, -0.2125 * 10.0_f64.to_radians().cos(), epsilon = 1e-12);
        assert_abs_diff_eq!(m.y, 0.25 * 10.0_f64.to_radians().cos(), epsilon = 1e-12);
        assert_abs_diff_eq!(m.z, p.k1(), epsilon = 1e-12);
        assert_abs_diff_eq!(p.k1(), 0.0642, epsilon = 5e-5);
    }

    #[test]
    fn rotor_wrench_linear() {
        let p = params();
        let a = [1.3, 0.2, 2.0, 0.9];
        let b = [0.5, 1.1, 0.0, 2.2];
        let scale = |t: &[f64; 4], s: f64| [t[0] * s, t[1] * s, t[2] * s, t[3] * s];
        let add = |x: &[f64; 4], y: &[f64; 4]| {
            [x[0] + y[0], x[1] + y[1], x[2] + y[2], x[3] + y[3]]
        };
        let (fya, fza, ma) = rotor_wrench(&a, &p);
        let (fyb, fzb, mb) = rotor_wrench(&b, &p);
        let combo = add(&scale(&a, 2.0), &scale(&b, 3.0));
        let (fy, fz, m) = rotor_wrench(&combo, &p);
        assert_abs_diff_eq!(fy, 2.0 * fya + 3.0 * fyb, epsilon = 1e-12);
        assert_abs_diff_eq!(fz, 2.0 * fza + 3.0 * fzb, epsilon = 1e-12);
        assert!((m - (2.0 * ma + 3.0 * mb)).norm() < 1e-12);
    }

    #[test]
    fn airspeed_level_flight_alpha_is_kappa() {
        let p = params();
        let air = relative_airspeed(
            &Vector3::new(10.0, 0.0, 0.0),
            &UnitQuaternion::identity(),
            &Vector3::zeros(),
            &p,
        );
        assert_abs_diff_eq!(air.speed, 10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(air.alpha, p.kappa, epsilon = 1e-12);
        assert_abs_diff_eq!(air.beta, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn airspeed_alpha_tracks_pitch() {
        // Level velocity with body pitch theta gives alpha = kappa + theta.
        let p = params();
        for theta in [-0.6, -0.3, 0.0, 0.2] {
            let q = crate::frames::EulerZxy::new(0.0, theta, 0.0).to_quaternion();
            let air =
                relative_airspeed(&Vector3::new(12.0, 0.0, 0.0), &q, &Vector3::zeros(), &p);
            assert_abs_diff_eq!(air.alpha, p.kappa + theta, epsilon = 1e-10);
        }
    }

    #[test]
    fn airspeed_degenerate_and_sideslip() {
        let p = params();
        let air = relative_airspeed(
            &Vector3::zeros(),
            &UnitQuaternion::identity(),
            &Vector3::zeros(),
            &p,
        );
        assert_eq!((air.speed, air.alpha, air.beta), (0.0, 0.0, 0.0));

        // 45 deg sideslip from equal x/y lifting-frame components.
        let v = p.r_lifting_to_body() * Vector3::new(1.0, 1.0, 0.0);
        let v_earth = rot_body_to_earth(&UnitQuaternion::identity()) * v;
        let air =
            relative_airspeed(&v_earth, &UnitQuaternion::identity(), &Vector3::zeros(), &p);
        assert_abs_diff_eq!(air.beta, std::f64::consts::FRAC_PI_4, epsilon = 1e-12);
    }

    #[test]
    fn blend_anchor_points() {
        let c = AeroCoefficients::default();
        let (cl0, cd0) = blended_lift_drag(0.0, &c);
        assert_eq!(cl0, 0.0);
        assert_eq!(cd0, 0.055);

        let (cl90, cd90) = blended_lift_drag(std::f64::consts::FRAC_PI_2, &c);
        assert_abs_diff_eq!(cl90, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(cd90, 0.055 + 2.0 * 0.9, epsilon = 1e-9);

        let (cl45, _) = blended_lift_drag(45.0_f64.to_radians(), &c);
        assert_abs_diff_eq!(cl45, 0.9, epsilon = 1e-9);
        assert!(pseudo_sigmoid(c.alpha0, c.k_l, 45.0_f64.to_radians()) < 1e-6);
    }

    #[test]
    fn blend_continuity_and_drag_floor() {
        let c = AeroCoefficients::default();
        let n = 40_000;
        let step = 2.0 * std::f64::consts::PI / n as f64;
        let mut prev = blended_lift_drag(-std::f64::consts::PI, &c);
        for i in 1..=n {
            let a = -std::f64::consts::PI + i as f64 * step;
            let cur = blended_lift_drag(a, &c);
            assert!((cur.0 - prev.0).abs() < 30.0 * step, "C_L jump at {a}");
            assert!((cur.1 - prev.1).abs() < 30.0 * step, "C_D jump at {a}");
            assert!(cur.1 >= c.c0 - 1e-12, "C_D below floor at {a}");
            prev = cur;
        }
    }

    #[test]
    fn aileron_mix_cases() {
        assert_eq!(aileron_mix(0.1, 0.1), (0.2, 0.0));
        let (de, da) = aileron_mix(-0.1, 0.1);
        assert_abs_diff_eq!(de, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(da, 0.2, epsilon = 1e-15);
        let (de, da) = aileron_mix(0.05, 0.1);
        assert_abs_diff_eq!(de, 0.15, epsilon = 1e-15);
        assert_abs_diff_eq!(da, 0.05, epsilon = 1e-15);
    }

    #[test]
    fn aero_wrench_zero_speed_and_scaling() {
        let p = params();
        let c = AeroCoefficients::default();
        let still = AirData::still();
        assert_eq!(aero_wrench(&still, &Vector3::zeros(), 0.0, 0.0, &c, &p), Wrench::zero());

        // Quadratic scaling with airspeed at fixed angles.
        let mk = |v: f64| AirData {
            v_lifting: Vector3::new(v * 0.99, v * 0.02, v * 0.14),
            speed: v,
            alpha: 0.14,
            beta: 0.02,
        };
        let w1 = aero_wrench(&mk(10.0), &Vector3::zeros(), 0.05, -0.03, &c, &p);
        let w2 = aero_wrench(&mk(20.0), &Vector3::zeros(), 0.05, -0.03, &c, &p);
        assert!((w2.force - 4.0 * w1.force).norm() < 1e-9);
        assert!((w2.moment - 4.0 * w1.moment).norm() < 1e-9);
    }

    #[test]
    fn aero_wrench_lift_magnitude_and_elevator_linearity() {
        let p = params();
        let c = AeroCoefficients::default();
        let alpha = 4.0_f64.to_radians();
        let air = AirData {
            v_lifting: Vector3::new(20.0 * alpha.cos(), 0.0, 20.0 * alpha.sin()),
            speed: 20.0,
            alpha,
            beta: 0.0,
        };
        let (cl, cd) = blended_lift_drag(alpha, &c);
        let q = 0.5 * p.rho * 400.0;
        let w = aero_wrench(&air, &Vector3::zeros(), 0.0, 0.0, &c, &p);
        // Rotating the body force back into the wind frame recovers -D, -L.
        let wind = rot_wind_to_body(p.kappa - alpha, 0.0).transpose() * w.force;
        assert_abs_diff_eq!(wind.x, -q * p.wing_area * cd, epsilon = 1e-9);
        assert_abs_diff_eq!(wind.z, -q * p.wing_area * cl, epsilon = 1e-9);

        let w1 = aero_wrench(&air, &Vector3::zeros(), 0.02, 0.0, &c, &p);
        let w2 = aero_wrench(&air, &Vector3::zeros(), 0.04, 0.0, &c, &p);
        let d1 = w1.force - w.force;
        let d2 = w2.force - w.force;
        assert!((d2 - 2.0 * d1).norm() < 1e-9);
    }

    #[test]
    fn total_wrench_hover_equilibrium() {
        let p = params();
        let c = AeroCoefficients::default();
        let t = p.hover_thrust_per_rotor();
        let w = (t / p.k_f).sqrt();
        let act = ActuatorState { rotor_speed: [w; 4], aileron: [0.0; 2] };
        let wrench = total_wrench(
            &UnitQuaternion::identity(),
            &Vector3::zeros(),
            &Vector3::zeros(),
            &act,
            &Vector3::zeros(),
            &p,
            &c,
        );
        assert!(wrench.force.norm() < 1e-9, "residual force {}", wrench.force.norm());
        assert!(wrench.moment.norm() < 1e-9, "residual moment {}", wrench.moment.norm());
    }

    #[test]
    fn total_wrench_gravity_only() {
        let p = params();
        let c = AeroCoefficients::default();
        let act = ActuatorState { rotor_speed: [0.0; 4], aileron: [0.0; 2] };
        let q = crate::frames::EulerZxy::new(0.3, -0.5, 1.1).to_quaternion();
        let wrench = total_wrench(
            &q,
            &Vector3::zeros(),
            &Vector3::zeros(),
            &act,
            &Vector3::zeros(),
            &p,
            &c,
        );
        let expect = rot_body_to_earth(&q).transpose()
            * Vector3::new(0.0, 0.0, p.mass * p.gravity);
        assert!((wrench.force - expect).norm() < 1e-12);
    }

    #[test]
    fn wrench_continuous_in_alpha_across_blend() {
        let p = params();
        let c = AeroCoefficients::default();
        let mut prev: Option<Wrench> = None;
        let steps = 200_000;
        for i in 0..=steps {
            let alpha = 0.02 + 0.08 * i as f64 / steps as f64; // sweep across alpha0
            let air = AirData {
                v_lifting: Vector3::new(15.0 * alpha.cos(), 0.0, 15.0 * alpha.sin()),
                speed: 15.0,
                alpha,
                beta: 0.0,
            };
            let w = aero_wrench(&air, &Vector3::zeros(), 0.0, 0.0, &c, &p);
            if let Some(pw) = prev {
                assert!((w.force - pw.force).abs().max() < 1e-3);
            }
            prev = Some(w);
        }
    }

    #[test]
    fn actuator_step_behaviour() {
        let m = ActuatorModel::default();
        let p = params();
        let s0 = ActuatorState { rotor_speed: [200.0; 4], aileron: [0.0; 2] };
        let cmd = [0.6, 0.6, 0.6, 0.6, 0.5, 0.5];

        // Steady state after many time constants.
        let mut s = s0;
        for _ in 0..4000 {
            s = s.step(&cmd, &m, 0.001);
        }
        assert_abs_diff_eq!(s.rotor_speed[0], m.motor_gain * 0.6 + m.motor_bias, epsilon = 1e-6);

        // One small step matches the Euler slope to O(dt^2).
        let dt = 1e-4;
        let s1 = s0.step(&cmd, &m, dt);
        let target = m.motor_gain * 0.6 + m.motor_bias;
        let euler = s0.rotor_speed[0] + (target - s0.rotor_speed[0]) * dt / m.t_motor;
        let second_order = (target - s0.rotor_speed[0]).abs() * dt * dt / (2.0 * m.t_motor * m.t_motor);
        assert!((s1.rotor_speed[0] - euler).abs() < 1.1 * second_order);

        // 63.2% of the change is reached at t = T.
        let s_tau = s0.step(&cmd, &m, m.t_motor);
        let frac = (s_tau.rotor_speed[0] - s0.rotor_speed[0]) / (target - s0.rotor_speed[0]);
        assert_abs_diff_eq!(frac, 1.0 - (-1.0_f64).exp(), epsilon = 1e-12);

        // Determinism: identical inputs give bit-identical outputs.
        let a = s0.step(&cmd, &m, 0.001);
        let b = s0.step(&cmd, &m, 0.001);
        assert_eq!(a, b);
        let _ = p;
    }

    #[test]
    fn throttle_thrust_round_trip() {
        let m = ActuatorModel::default();
        let p = params();
        for t in [0.5, 2.0, 4.785, 9.0, 11.5] {
            let sigma = m.throttle_for_thrust(t, &p);
            let w = m.motor_gain * sigma + m.motor_bias;
            assert_abs_diff_eq!(p.k_f * w * w, t, epsilon = 1e-9);
        }
        assert!(m.max_thrust(&p) > 11.9);
        assert!(m.idle_thrust(&p) < 0.2);
    }
}
