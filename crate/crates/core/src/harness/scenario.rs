//! Declarative scenario definitions and their TOML file format.

use serde::{Deserialize, Serialize};

use crate::allocator::AllocatorConfig;
use crate::controller::ControllerConfig;
use crate::error::ConfigError;
use crate::power::PowerModel;
use crate::sim::{NoiseConfig, WindModel};
use crate::vehicle::{ActuatorModel, AeroCoefficients, VehicleParams};

use super::trajectory::{line_circle, turn_legs, Trajectory};

/// Setpoint program of a scenario.
#[derive(Debug, Clone)]
pub enum Program {
    /// Hold a fixed position.
    Hover { position: [f64; 3] },
    /// Track an analytic reference trajectory.
    Trajectory(Trajectory),
    /// Hover, then hold a commanded attitude with altitude hold.
    PitchStep { hover_s: f64, pitch: f64, altitude: f64 },
}

impl Program {
    /// Time the scripted maneuver begins, when there is one.
    pub fn transition_start(&self) -> Option<f64> {
        match self {
            Program::PitchStep { hover_s, .. } => Some(*hover_s),
            _ => None,
        }
    }

    pub fn arc_windows(&self) -> Vec<(f64, f64)> {
        match self {
            Program::Trajectory(t) => t.arc_windows(),
            _ => Vec::new(),
        }
    }
}

/// A complete, runnable experiment description.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub family: String,
    pub duration: f64,
    pub seed: u64,
    /// Physics step, s.
    pub dt: f64,
    /// Controller/allocator rate, Hz.
    pub control_rate: f64,
    /// Log every Nth control cycle.
    pub log_decimation: usize,
    /// Airspeed threshold closing a transition maneuver, m/s.
    pub transition_airspeed: f64,
    pub vehicle: VehicleParams,
    pub aero: AeroCoefficients,
    pub actuators: ActuatorModel,
    pub allocator: AllocatorConfig,
    pub controller: ControllerConfig,
    pub wind: WindModel,
    pub noise: NoiseConfig,
    pub power: PowerModel,
    pub program: Program,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.name.is_empty() {
            return Err(ConfigError::new("scenario name must not be empty"));
        }
        if !(self.duration > 0.0) {
            return Err(ConfigError::new("duration must be positive"));
        }
        if !(self.control_rate > 0.0) {
            return Err(ConfigError::new("control_rate must be positive"));
        }
        if self.log_decimation == 0 {
            return Err(ConfigError::new("log_decimation must be at least 1"));
        }
        self.vehicle.validate()?;
        self.aero.validate()?;
        Ok(())
    }

    /// Parse a scenario document.
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let doc: ScenarioDoc =
            toml::from_str(text).map_err(|e| ConfigError::new(format!("scenario parse: {e}")))?;
        let sc = doc.into_scenario();
        sc.validate()?;
        Ok(sc)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new(format!("read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }
}

fn d_one() -> usize {
    1
}
fn d_dt() -> f64 {
    0.001
}
fn d_rate() -> f64 {
    250.0
}
fn d_duration() -> f64 {
    30.0
}
fn d_threshold() -> f64 {
    18.0
}
fn d_accel() -> f64 {
    2.0
}
fn d_line() -> f64 {
    5.0
}

/// On-disk scenario schema. Any omitted section falls back to the stock
/// configuration; `kappa_deg` is a convenience override of the wing
/// installation angle.
#[derive(Debug, Deserialize, Serialize)]
pub struct ScenarioDoc {
    pub name: String,
    #[serde(default)]
    pub family: String,
    #[serde(default = "d_duration")]
    pub duration: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "d_dt")]
    pub dt: f64,
    #[serde(default = "d_rate")]
    pub control_rate: f64,
    #[serde(default = "d_one")]
    pub log_decimation: usize,
    #[serde(default = "d_threshold")]
    pub transition_airspeed: f64,
    #[serde(default)]
    pub kappa_deg: Option<f64>,
    #[serde(default)]
    pub vehicle: VehicleParams,
    #[serde(default)]
    pub aero: AeroCoefficients,
    #[serde(default)]
    pub actuators: ActuatorModel,
    #[serde(default)]
    pub allocator: AllocatorConfig,
    #[serde(default)]
    pub controller: ControllerConfig,
    #[serde(default)]
    pub wind: WindModel,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub power: PowerModel,
    pub program: ProgramDoc,
}

impl ScenarioDoc {
    pub fn into_scenario(self) -> Scenario {
        let mut vehicle = self.vehicle;
        if let Some(deg) = self.kappa_deg {
            vehicle.kappa = deg.to_radians();
        }
        let program = self.program.into_program();
        Scenario {
            name: self.name,
            family: self.family,
            duration: self.duration,
            seed: self.seed,
            dt: self.dt,
            control_rate: self.control_rate,
            log_decimation: self.log_decimation,
            transition_airspeed: self.transition_airspeed,
            vehicle,
            aero: self.aero,
            actuators: self.actuators,
            allocator: self.allocator,
            controller: self.controller,
            wind: self.wind,
            noise: self.noise,
            power: self.power,
            program,
        }
    }
}

/// Program section of a scenario file.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProgramDoc {
    Hover {
        position: [f64; 3],
    },
    LineCircle {
        speed: f64,
        radius: f64,
        #[serde(default = "d_accel")]
        accel: f64,
        #[serde(default = "d_line")]
        line_s: f64,
        altitude: f64,
    },
    Transition {
        hover_s: f64,
        pitch_step_deg: f64,
        altitude: f64,
    },
    TurnLegs {
        high_speed: f64,
        low_speed: f64,
        high_radius: f64,
        low_radius: f64,
        turn_deg: f64,
        leg_s: f64,
        #[serde(default = "d_accel")]
        accel: f64,
        altitude: f64,
    },
}

impl ProgramDoc {
    pub fn into_program(self) -> Program {
        match self {
            ProgramDoc::Hover { position } => Program::Hover { position },
            ProgramDoc::LineCircle { speed, radius, accel, line_s, altitude } => {
                Program::Trajectory(line_circle(speed, radius, accel, line_s, altitude))
            }
            ProgramDoc::Transition { hover_s, pitch_step_deg, altitude } => Program::PitchStep {
                hover_s,
                pitch: pitch_step_deg.to_radians(),
                altitude,
            },
            ProgramDoc::TurnLegs {
                high_speed,
                low_speed,
                high_radius,
                low_radius,
                turn_deg,
                leg_s,
                accel,
                altitude,
            } => Program::Trajectory(turn_legs(
                high_speed,
                low_speed,
                high_radius,
                low_radius,
                turn_deg.to_radians(),
                leg_s,
                accel,
                altitude,
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_minimal_scenario() {
        let text = r#"
            name = "hover-check"
            family = "hover"
            duration = 5.0

            [program]
            kind = "hover"
            position = [0.0, 0.0, -10.0]
        "#;
        let sc = Scenario::from_toml_str(text).unwrap();
        assert_eq!(sc.name, "hover-check");
        assert_eq!(sc.dt, 0.001);
        assert!(matches!(sc.program, Program::Hover { .. }));
    }

    #[test]
    fn kappa_override_and_sections() {
        let text = r#"
            name = "ts"
            kappa_deg = 90.0
            duration = 10.0

            [allocator]
            use-ailerons = false

            [program]
            kind = "transition"
            hover_s = 2.0
            pitch_step_deg = -70.0
            altitude = 20.0
        "#;
        // TOML keys use underscores; the kebab one must fail.
        assert!(Scenario::from_toml_str(text).is_err());

        let text = text.replace("use-ailerons", "use_ailerons");
        let sc = Scenario::from_toml_str(&text).unwrap();
        assert!((sc.vehicle.kappa - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        assert!(!sc.allocator.use_ailerons);
        assert_eq!(sc.program.transition_start(), Some(2.0));
    }

    #[test]
    fn reject_bad_values() {
        let text = r#"
            name = ""
            [program]
            kind = "hover"
            position = [0.0, 0.0, 0.0]
        "#;
        assert!(Scenario::from_toml_str(text).is_err());
    }
}
