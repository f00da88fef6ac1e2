//! Deterministic 6-DOF flight dynamics, a unified full-envelope controller,
//! and an optimization-based, energy-aware control allocator for a
//! lifting-wing quadcopter, together with the scenario harness that drives
//! the stock experiments.

pub mod allocator;
pub mod controller;
pub mod error;
pub mod frames;
pub mod harness;
pub mod power;
pub mod sim;
pub mod vehicle;

pub use allocator::{
    allocate, build_effectiveness, kkt_check, preferred_vector, AllocationProblem,
    AllocationResult, AllocatorConfig, EffectivenessMatrix, PreferredMode, VarTag, WarmStart,
};
pub use controller::{
    extract_attitude_thrust, AttitudeGains, ControlOutput, Controller, ControllerConfig,
    PositionGains, Setpoint,
};
pub use error::{AllocationError, ConfigError, SimError};
pub use frames::EulerZxy;
pub use power::{EnergyAccumulator, PowerModel};
pub use sim::{Measurement, NoiseConfig, SimState, Simulation, WindModel};
pub use vehicle::{
    ActuatorModel, ActuatorState, AeroCoefficients, AirData, VehicleParams, Wrench,
};
