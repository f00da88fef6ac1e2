//! Scenario definitions, reference trajectories, batch execution, metrics,
//! and the stock experiment set.

pub mod log;
pub mod metrics;
pub mod runner;
pub mod scenario;
pub mod trajectory;

pub use log::{LogWriter, COLUMNS, LOG_SCHEMA};
pub use metrics::{compare_runs, Check, ComparisonReport, ScenarioMetrics, METRICS_SCHEMA};
pub use runner::{run_scenario, RunOutput};
pub use scenario::{Program, ProgramDoc, Scenario, ScenarioDoc};
pub use trajectory::{line_circle, turn_legs, ReferenceSample, Segment, Trajectory};

/// Stock scenarios reproducing the reference experiments. The shipped
/// `scenarios/*.toml` files mirror these definitions.
pub mod stock {
    use super::scenario::{Program, Scenario};
    use super::trajectory::{line_circle, turn_legs};
    use crate::allocator::AllocatorConfig;
    use crate::controller::ControllerConfig;
    use crate::power::PowerModel;
    use crate::sim::{NoiseConfig, WindModel};
    use crate::vehicle::{ActuatorModel, AeroCoefficients, VehicleParams};

    fn base(name: &str, family: &str, duration: f64, seed: u64, program: Program) -> Scenario {
        Scenario {
            name: name.to_string(),
            family: family.to_string(),
            duration,
            seed,
            dt: 0.001,
            control_rate: 250.0,
            log_decimation: 1,
            transition_airspeed: 18.0,
            vehicle: VehicleParams::default(),
            aero: AeroCoefficients::default(),
            actuators: ActuatorModel::default(),
            allocator: AllocatorConfig::default(),
            controller: ControllerConfig::default(),
            wind: WindModel::default(),
            noise: NoiseConfig::default(),
            power: PowerModel::default(),
            program,
        }
    }

    /// Station-keeping hover regression.
    pub fn hover(duration: f64) -> Scenario {
        base(
            "hover",
            "hover",
            duration,
            7,
            Program::Hover { position: [0.0, 0.0, -20.0] },
        )
    }

    /// Line-plus-circle tracking with the motor energy metric; gusts keep
    /// the loop working so the actuator split matters.
    pub fn energy(speed: f64, with_ailerons: bool, seed: u64) -> Scenario {
        let family = if speed < 10.0 { "energy-low" } else { "energy-high" };
        let suffix = if with_ailerons { "aileron" } else { "rotor" };
        let mut sc = base(
            &format!("energy-{:.0}-{}", speed, suffix),
            family,
            40.0,
            seed,
            Program::Trajectory(line_circle(speed, 200.0, 2.0, 5.0, 20.0)),
        );
        sc.wind = WindModel { mean: [0.0; 3], gust_std: 1.2, gust_tau: 1.5 };
        sc.allocator.use_ailerons = with_ailerons;
        sc
    }

    /// Two-speed turn course for the coordinated-turn comparison.
    pub fn coordinated_turn(enabled: bool, seed: u64) -> Scenario {
        let mut sc = base(
            if enabled { "ct-on" } else { "ct-off" },
            "ct",
            75.0,
            seed,
            Program::Trajectory(turn_legs(
                18.0,
                4.0,
                150.0,
                12.0,
                std::f64::consts::PI,
                6.0,
                2.0,
                20.0,
            )),
        );
        sc.controller.coordinated_turn = enabled;
        sc
    }

    /// Hover-to-forward-flight maneuver: a pitch step with altitude hold.
    /// `kappa_deg = 90` turns the airframe into the tail-sitter variant.
    pub fn transition(name: &str, kappa_deg: f64, pitch_step_deg: f64, duration: f64) -> Scenario {
        let mut sc = base(
            name,
            "transition",
            duration,
            3,
            Program::PitchStep {
                hover_s: 2.0,
                pitch: pitch_step_deg.to_radians(),
                altitude: 20.0,
            },
        );
        sc.vehicle.kappa = kappa_deg.to_radians();
        sc
    }
}
