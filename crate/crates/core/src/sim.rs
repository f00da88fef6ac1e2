//! Time-domain integration of the rigid-body dynamics with actuator lag and
//! wind, plus the measurement path feeding the controller.
//!
//! One `Simulation` owns one vehicle and is strictly single-threaded; the
//! whole run is a pure function of (initial state, command sequence, seed,
//! dt). Attitude is stored once as the body-to-earth quaternion; the
//! lifting-frame view needed by the rotational dynamics comes from the
//! constant conjugation with the installation rotation. Angular rate is kept
//! in the lifting frame.

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, SimError};
use crate::vehicle::{
    relative_airspeed, total_wrench, ActuatorModel, ActuatorState, AeroCoefficients, AirData,
    VehicleParams, Wrench,
};

/// Full simulation state.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    /// Position in the earth frame, m (z down).
    pub position: Vector3<f64>,
    /// Velocity in the earth frame, m/s.
    pub velocity: Vector3<f64>,
    /// Body-to-earth attitude.
    pub attitude: UnitQuaternion<f64>,
    /// Angular rate in the lifting frame, rad/s.
    pub omega_lifting: Vector3<f64>,
    pub actuators: ActuatorState,
}

impl SimState {
    /// Hover equilibrium at `position` with the given yaw: rotor speeds
    /// preloaded to balance gravity, elevons level.
    pub fn hover(
        params: &VehicleParams,
        _model: &ActuatorModel,
        position: Vector3<f64>,
        yaw: f64,
    ) -> Self {
        let w = (params.hover_thrust_per_rotor() / params.k_f).sqrt();
        Self {
            t: 0.0,
            position,
            velocity: Vector3::zeros(),
            attitude: crate::frames::EulerZxy::new(0.0, 0.0, yaw).to_quaternion(),
            omega_lifting: Vector3::zeros(),
            actuators: ActuatorState { rotor_speed: [w; 4], aileron: [0.0; 2] },
        }
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|v| v.is_finite())
            && self.velocity.iter().all(|v| v.is_finite())
            && self.omega_lifting.iter().all(|v| v.is_finite())
            && self.attitude.coords.iter().all(|v| v.is_finite())
            && self.actuators.rotor_speed.iter().all(|v| v.is_finite())
            && self.actuators.aileron.iter().all(|v| v.is_finite())
    }
}

/// Constant wind plus an optional seeded band-limited gust (first-order
/// Gauss-Markov per axis).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindModel {
    /// Mean wind in the earth frame, m/s.
    pub mean: [f64; 3],
    /// Gust standard deviation per axis, m/s. Zero disables the gust.
    pub gust_std: f64,
    /// Gust correlation time, s.
    pub gust_tau: f64,
}

impl Default for WindModel {
    fn default() -> Self {
        Self { mean: [0.0; 3], gust_std: 0.0, gust_tau: 2.0 }
    }
}

/// Additive Gaussian measurement noise; disabled by default.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub enabled: bool,
    /// Position noise, m.
    pub pos_std: f64,
    /// Velocity noise, m/s.
    pub vel_std: f64,
    /// Small-angle attitude noise, rad.
    pub att_std: f64,
    /// Angular-rate noise, rad/s.
    pub rate_std: f64,
    /// Airspeed noise, m/s.
    pub airspeed_std: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            pos_std: 0.01,
            vel_std: 0.02,
            att_std: 0.002,
            rate_std: 0.005,
            airspeed_std: 0.1,
        }
    }
}

/// State feedback handed to the controller.
#[derive(Debug, Clone)]
pub struct Measurement {
    pub t: f64,
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub attitude: UnitQuaternion<f64>,
    pub omega_lifting: Vector3<f64>,
    pub air: AirData,
}

#[derive(Debug, Clone)]
struct RigidState {
    p: Vector3<f64>,
    v: Vector3<f64>,
    q: Quaternion<f64>,
    w: Vector3<f64>,
}

impl RigidState {
    fn axpy(&self, dt: f64, d: &RigidState) -> RigidState {
        RigidState {
            p: self.p + dt * d.p,
            v: self.v + dt * d.v,
            q: self.q + d.q * dt,
            w: self.w + dt * d.w,
        }
    }
}

/// Deterministic fixed-step simulator.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub params: VehicleParams,
    pub coeffs: AeroCoefficients,
    pub actuator_model: ActuatorModel,
    pub wind: WindModel,
    pub noise: NoiseConfig,
    dt: f64,
    state: SimState,
    inertia: Matrix3<f64>,
    inertia_inv: Matrix3<f64>,
    r_lb: Matrix3<f64>,
    gust: Vector3<f64>,
    gust_rng: ChaCha8Rng,
    noise_rng: ChaCha8Rng,
}

impl Simulation {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        params: VehicleParams,
        coeffs: AeroCoefficients,
        actuator_model: ActuatorModel,
        wind: WindModel,
        noise: NoiseConfig,
        dt: f64,
        seed: u64,
        initial: SimState,
    ) -> Result<Self, ConfigError> {
        params.validate()?;
        coeffs.validate()?;
        if !(dt > 0.0 && dt <= 0.01) {
            return Err(ConfigError::new(format!("dt must be in (0, 0.01] s, got {dt}")));
        }
        let inertia = params.inertia();
        let inertia_inv = inertia
            .try_inverse()
            .ok_or_else(|| ConfigError::new("inertia matrix is singular"))?;
        let r_lb = params.r_lifting_to_body();
        Ok(Self {
            params,
            coeffs,
            actuator_model,
            wind,
            noise,
            dt,
            state: initial,
            inertia,
            inertia_inv,
            r_lb,
            gust: Vector3::zeros(),
            gust_rng: ChaCha8Rng::seed_from_u64(seed),
            noise_rng: ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15),
        })
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn inertia(&self) -> &Matrix3<f64> {
        &self.inertia
    }

    /// Current wind vector including the gust component.
    pub fn wind_now(&self) -> Vector3<f64> {
        Vector3::from(self.wind.mean) + self.gust
    }

    fn derivatives(&self, s: &RigidState, actuators: &ActuatorState, wind: &Vector3<f64>) -> RigidState {
        let q_unit = UnitQuaternion::new_normalize(s.q);
        let wrench: Wrench = total_wrench(
            &q_unit,
            &s.v,
            &s.w,
            actuators,
            wind,
            &self.params,
            &self.coeffs,
        );
        let dv = q_unit.to_rotation_matrix() * wrench.force / self.params.mass;
        let omega_body = self.r_lb * s.w;
        let dq = s.q * Quaternion::from_parts(0.0, omega_body) * 0.5;
        let dw = self.inertia_inv * (wrench.moment - s.w.cross(&(self.inertia * s.w)));
        RigidState { p: s.v, v: dv, q: dq, w: dw }
    }

    /// Advance one step under constant unit commands (4 throttles + 2 servo
    /// commands).
    ///
    /// Actuators follow their exact first-order-lag solution; the rigid body
    /// integrates with classical RK4 sampling the actuator trajectory at the
    /// stage times. The quaternion is renormalized afterwards. A non-finite
    /// result aborts with the state left at the last good step.
    pub fn step(&mut self, commands: &[f64; 6]) -> Result<(), SimError> {
        let dt = self.dt;

        // Gust update: exact Ornstein-Uhlenbeck discretization.
        if self.wind.gust_std > 0.0 {
            let decay = (-dt / self.wind.gust_tau).exp();
            let scale = self.wind.gust_std * (1.0 - decay * decay).sqrt();
            let n = Vector3::new(
                gaussian(&mut self.gust_rng),
                gaussian(&mut self.gust_rng),
                gaussian(&mut self.gust_rng),
            );
            self.gust = self.gust * decay + scale * n;
        }
        let wind = self.wind_now();

        let act0 = self.state.actuators;
        let act_half = act0.step(commands, &self.actuator_model, 0.5 * dt);
        let act_full = act0.step(commands, &self.actuator_model, dt);

        let y0 = RigidState {
            p: self.state.position,
            v: self.state.velocity,
            q: self.state.attitude.into_inner(),
            w: self.state.omega_lifting,
        };
        let k1 = self.derivatives(&y0, &act0, &wind);
        let k2 = self.derivatives(&y0.axpy(0.5 * dt, &k1), &act_half, &wind);
        let k3 = self.derivatives(&y0.axpy(0.5 * dt, &k2), &act_half, &wind);
        let k4 = self.derivatives(&y0.axpy(dt, &k3), &act_full, &wind);

        let sixth = dt / 6.0;
        let p = y0.p + sixth * (k1.p + 2.0 * k2.p + 2.0 * k3.p + k4.p);
        let v = y0.v + sixth * (k1.v + 2.0 * k2.v + 2.0 * k3.v + k4.v);
        let q_raw = y0.q + (k1.q + k2.q * 2.0 + k3.q * 2.0 + k4.q) * sixth;
        let w = y0.w + sixth * (k1.w + 2.0 * k2.w + 2.0 * k3.w + k4.w);

        let next = SimState {
            t: self.state.t + dt,
            position: p,
            velocity: v,
            attitude: UnitQuaternion::new_normalize(q_raw),
            omega_lifting: w,
            actuators: act_full,
        };
        if !next.is_finite() {
            return Err(SimError::NonFiniteState {
                t: self.state.t + dt,
                last_good: self.state.t,
            });
        }
        self.state = next;
        Ok(())
    }

    /// Measured state: ideal pass-through, or with seeded additive noise.
    pub fn measure(&mut self) -> Measurement {
        let wind = self.wind_now();
        let s = &self.state;
        let mut m = Measurement {
            t: s.t,
            position: s.position,
            velocity: s.velocity,
            attitude: s.attitude,
            omega_lifting: s.omega_lifting,
            air: relative_airspeed(&s.velocity, &s.attitude, &wind, &self.params),
        };
        if self.noise.enabled {
            let rng = &mut self.noise_rng;
            for i in 0..3 {
                m.position[i] += self.noise.pos_std * gaussian(rng);
                m.velocity[i] += self.noise.vel_std * gaussian(rng);
                m.omega_lifting[i] += self.noise.rate_std * gaussian(rng);
            }
            let rot = Vector3::new(
                self.noise.att_std * gaussian(rng),
                self.noise.att_std * gaussian(rng),
                self.noise.att_std * gaussian(rng),
            );
            m.attitude = m.attitude * UnitQuaternion::from_scaled_axis(rot);
            m.air.speed = (m.air.speed + self.noise.airspeed_std * gaussian(rng)).max(0.0);
        }
        m
    }
}

/// Standard normal sample (Box-Muller; two uniforms per call keeps the
/// stream layout independent of caller batching).
fn gaussian<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn quiet_sim(dt: f64, initial: SimState) -> Simulation {
        Simulation::new(
            VehicleParams::default(),
            AeroCoefficients::default(),
            ActuatorModel::default(),
            WindModel::default(),
            NoiseConfig::default(),
            dt,
            42,
            initial,
        )
        .unwrap()
    }

    fn hover_commands(sim: &Simulation) -> [f64; 6] {
        let t = sim.params.hover_thrust_per_rotor();
        let s = sim.actuator_model.throttle_for_thrust(t, &sim.params);
        [s, s, s, s, 0.5, 0.5]
    }

    #[test]
    fn hover_equilibrium_derivatives_are_zero() {
        let p = VehicleParams::default();
        let init = SimState::hover(&p, &ActuatorModel::default(), Vector3::zeros(), 0.0);
        let mut sim = quiet_sim(0.001, init.clone());
        let cmd = hover_commands(&sim);
        for _ in 0..100 {
            sim.step(&cmd).unwrap();
        }
        assert!(sim.state().velocity.norm() < 1e-9);
        assert!(sim.state().omega_lifting.norm() < 1e-9);
        assert!((sim.state().position).norm() < 1e-9);
    }

    #[test]
    fn free_fall_matches_gravity() {
        let p = VehicleParams::default();
        let init = SimState {
            t: 0.0,
            position: Vector3::zeros(),
            velocity: Vector3::zeros(),
            attitude: UnitQuaternion::identity(),
            omega_lifting: Vector3::zeros(),
            actuators: ActuatorState { rotor_speed: [0.0; 4], aileron: [0.0; 2] },
        };
        // Keep motors dead and the wing out of play.
        let mut params = p;
        params.wing_area = 1e-12;
        let mut sim = Simulation::new(
            params,
            AeroCoefficients::default(),
            ActuatorModel { motor_gain: 0.0, motor_bias: 0.0, ..ActuatorModel::default() },
            WindModel::default(),
            NoiseConfig::default(),
            0.001,
            1,
            init,
        )
        .unwrap();
        for _ in 0..1000 {
            sim.step(&[0.0, 0.0, 0.0, 0.0, 0.5, 0.5]).unwrap();
        }
        assert_abs_diff_eq!(sim.state().velocity.z, 9.81, epsilon = 1e-9);
        assert_abs_diff_eq!(sim.state().position.z, 0.5 * 9.81, epsilon = 1e-7);
    }

    #[test]
    fn principal_axis_spin_is_torque_free() {
        let p = VehicleParams::default();
        let init = SimState {
            t: 0.0,
            position: Vector3::zeros(),
            velocity: Vector3::zeros(),
            attitude: UnitQuaternion::identity(),
            omega_lifting: Vector3::new(0.0, 0.0, 1.0),
            actuators: ActuatorState { rotor_speed: [0.0; 4], aileron: [0.0; 2] },
        };
        let mut params = p;
        params.wing_area = 1e-12;
        let mut sim = Simulation::new(
            params,
            AeroCoefficients::default(),
            ActuatorModel { motor_gain: 0.0, motor_bias: 0.0, ..ActuatorModel::default() },
            WindModel::default(),
            NoiseConfig::default(),
            0.001,
            1,
            init,
        )
        .unwrap();
        for _ in 0..1000 {
            sim.step(&[0.0; 6]).unwrap();
        }
        assert!((sim.state().omega_lifting - Vector3::new(0.0, 0.0, 1.0)).norm() < 1e-9);
    }

    #[test]
    fn tumbling_conserves_angular_momentum_norm() {
        let p = VehicleParams::default();
        let init = SimState {
            t: 0.0,
            position: Vector3::zeros(),
            velocity: Vector3::zeros(),
            attitude: UnitQuaternion::identity(),
            omega_lifting: Vector3::new(0.7, -1.3, 0.4),
            actuators: ActuatorState { rotor_speed: [0.0; 4], aileron: [0.0; 2] },
        };
        let mut params = p.clone();
        params.wing_area = 1e-12;
        let mut sim = Simulation::new(
            params.clone(),
            AeroCoefficients::default(),
            ActuatorModel { motor_gain: 0.0, motor_bias: 0.0, ..ActuatorModel::default() },
            WindModel::default(),
            NoiseConfig::default(),
            0.001,
            1,
            init,
        )
        .unwrap();
        let j = params.inertia();
        let h0 = (j * sim.state().omega_lifting).norm();
        for _ in 0..10_000 {
            sim.step(&[0.0; 6]).unwrap();
        }
        let h1 = (j * sim.state().omega_lifting).norm();
        assert!((h1 - h0).abs() < 1e-6, "momentum drift {}", (h1 - h0).abs());
    }

    #[test]
    fn quaternion_norm_stays_unit() {
        let p = VehicleParams::default();
        let init = SimState {
            omega_lifting: Vector3::new(0.5, 0.2, -0.8),
            ..SimState::hover(&p, &ActuatorModel::default(), Vector3::zeros(), 0.3)
        };
        let mut sim = quiet_sim(0.001, init);
        let cmd = hover_commands(&sim);
        for _ in 0..20_000 {
            sim.step(&cmd).unwrap();
            let n = sim.state().attitude.into_inner().norm();
            assert!((n - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn identical_seeds_give_identical_trajectories() {
        let p = VehicleParams::default();
        let mk = || {
            let init = SimState::hover(&p, &ActuatorModel::default(), Vector3::zeros(), 0.0);
            Simulation::new(
                p.clone(),
                AeroCoefficients::default(),
                ActuatorModel::default(),
                WindModel { mean: [1.0, 0.5, 0.0], gust_std: 0.8, gust_tau: 1.5 },
                NoiseConfig { enabled: true, ..NoiseConfig::default() },
                0.001,
                1234,
                init,
            )
            .unwrap()
        };
        let mut a = mk();
        let mut b = mk();
        let cmd = [0.55, 0.52, 0.53, 0.54, 0.45, 0.55];
        for _ in 0..500 {
            a.step(&cmd).unwrap();
            b.step(&cmd).unwrap();
            let ma = a.measure();
            let mb = b.measure();
            assert_eq!(a.state(), b.state());
            assert_eq!(ma.position, mb.position);
            assert_eq!(ma.air.speed, mb.air.speed);
        }
    }

    #[test]
    fn measurement_noise_statistics_and_passthrough() {
        let p = VehicleParams::default();
        let init = SimState::hover(&p, &ActuatorModel::default(), Vector3::zeros(), 0.0);
        let mut sim = quiet_sim(0.001, init.clone());
        let m = sim.measure();
        assert_eq!(m.position, init.position);
        assert_eq!(m.velocity, init.velocity);

        let mut noisy = quiet_sim(0.001, init);
        noisy.noise.enabled = true;
        noisy.noise.pos_std = 0.01;
        let n = 100_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let m = noisy.measure();
            sum += m.position.x;
            sum_sq += m.position.x * m.position.x;
        }
        let mean = sum / n as f64;
        let std = (sum_sq / n as f64 - mean * mean).sqrt();
        assert!((std - 0.01).abs() < 0.0005, "sample std {std}");
    }
}
