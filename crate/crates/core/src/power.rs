//! Identified throttle-to-power map of the motors and trapezoidal energy
//! accounting. Servo power is negligible and excluded.

use serde::{Deserialize, Serialize};

/// Coefficients of the identified motor power fit.
///
/// Per motor: `p1 s^2 + p2 s + p3 sdot_up^p4 + p5 sdot_down^p6 + p7`, with
/// throttle `s` in [0, 1] and throttle rates in 1/s. The raw fit goes
/// negative at low throttle (it is only valid in the identified range), so
/// per-motor power is floored at zero.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerModel {
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub p4: f64,
    pub p5: f64,
    pub p6: f64,
    pub p7: f64,
}

impl Default for PowerModel {
    fn default() -> Self {
        Self { p1: 563.7, p2: -147.4, p3: 15.0, p4: 1.05, p5: 4.0, p6: 1.0, p7: 0.05538 }
    }
}

impl PowerModel {
    /// Per-motor electrical power, W, for throttles `sigma` and rates `sigma_dot`.
    pub fn motor_power(&self, sigma: &[f64; 4], sigma_dot: &[f64; 4]) -> [f64; 4] {
        let mut out = [0.0; 4];
        for i in 0..4 {
            let s = sigma[i];
            let up = sigma_dot[i].max(0.0);
            let down = (-sigma_dot[i]).max(0.0);
            let raw = self.p1 * s * s
                + self.p2 * s
                + self.p3 * up.powf(self.p4)
                + self.p5 * down.powf(self.p6)
                + self.p7;
            out[i] = raw.max(0.0);
        }
        out
    }

    /// Total power over the four motors, W.
    pub fn total_power(&self, sigma: &[f64; 4], sigma_dot: &[f64; 4]) -> f64 {
        self.motor_power(sigma, sigma_dot).iter().sum()
    }
}

/// Trapezoidal integrator for a sampled power stream.
#[derive(Debug, Clone, Default)]
pub struct EnergyAccumulator {
    last: Option<f64>,
    total: f64,
}

impl EnergyAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Add one power sample taken `dt` seconds after the previous one.
    pub fn add(&mut self, power: f64, dt: f64) {
        debug_assert!(dt > 0.0);
        if let Some(last) = self.last {
            self.total += 0.5 * (last + power) * dt;
        }
        self.last = Some(power);
    }

    /// Accumulated energy, J.
    pub fn total(&self) -> f64 {
        self.total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_throttle_power_is_constant_term() {
        let m = PowerModel::default();
        let p = m.total_power(&[0.0; 4], &[0.0; 4]);
        assert_abs_diff_eq!(p, 4.0 * 0.05538, epsilon = 1e-12);
    }

    #[test]
    fn half_throttle_matches_direct_substitution() {
        let m = PowerModel::default();
        let p = m.total_power(&[0.5; 4], &[0.0; 4]);
        let per = 563.7 * 0.25 - 147.4 * 0.5 + 0.05538;
        assert_abs_diff_eq!(p, 4.0 * per, epsilon = 1e-9);
        assert_abs_diff_eq!(p, 269.12152, epsilon = 1e-6);
    }

    #[test]
    fn low_throttle_clamped_to_zero() {
        let m = PowerModel::default();
        let p = m.motor_power(&[0.1, 0.1, 0.1, 0.1], &[0.0; 4]);
        assert_eq!(p, [0.0; 4]);
    }

    #[test]
    fn rate_terms_increase_power() {
        let m = PowerModel::default();
        let base = m.total_power(&[0.5; 4], &[0.0; 4]);
        let up = m.total_power(&[0.5; 4], &[0.4; 4]);
        let down = m.total_power(&[0.5; 4], &[-0.4; 4]);
        assert!(up > base);
        assert!(down > base);
    }

    #[test]
    fn trapezoid_constant_power() {
        let mut acc = EnergyAccumulator::new();
        for _ in 0..=1000 {
            acc.add(100.0, 0.01);
        }
        assert_abs_diff_eq!(acc.total(), 1000.0, epsilon = 1e-9);

        let mut zero = EnergyAccumulator::new();
        for _ in 0..100 {
            zero.add(0.0, 0.01);
        }
        assert_eq!(zero.total(), 0.0);
    }

    #[test]
    fn trapezoid_second_order_convergence() {
        // Smooth trace p(t) = 50 + 40 sin(t) over [0, 2].
        let exact = 50.0 * 2.0 + 40.0 * (1.0 - 2.0_f64.cos());
        let run = |n: usize| {
            let dt = 2.0 / n as f64;
            let mut acc = EnergyAccumulator::new();
            for i in 0..=n {
                let t = i as f64 * dt;
                acc.add(50.0 + 40.0 * t.sin(), dt);
            }
            (acc.total() - exact).abs()
        };
        let e1 = run(200);
        let e2 = run(400);
        assert!(e1 / e2 > 3.5, "expected ~4x error drop, got {}", e1 / e2);
    }
}
