//! Closed-loop scenario execution: simulator, controller, and allocator
//! wired together at their configured rates, with telemetry and metrics.

use nalgebra::Vector3;

use crate::allocator::{allocate, build_effectiveness, AllocationProblem, Vector6, WarmStart};
use crate::controller::{Controller, Setpoint};
use crate::error::ConfigError;
use crate::frames::EulerZxy;
use crate::power::EnergyAccumulator;
use crate::sim::{SimState, Simulation};

use super::log::LogWriter;
use super::metrics::{ScenarioMetrics, METRICS_SCHEMA};
use super::scenario::{Program, Scenario};

/// Everything one scenario run produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub metrics: ScenarioMetrics,
    /// Full trajectory log (CSV text).
    pub log: String,
}

/// Run a scenario to completion (or abort) and compute its metrics.
///
/// The physics integrates at `dt`; the controller, allocator, power model,
/// and log all run at `control_rate`. A non-finite simulation state stops
/// the run, keeps the partial log, and records the abort in the metrics.
pub fn run_scenario(sc: &Scenario) -> Result<RunOutput, ConfigError> {
    sc.validate()?;
    let params = sc.vehicle.clone();
    let dt_ctrl = 1.0 / sc.control_rate;
    let n_sub = (dt_ctrl / sc.dt).round().max(1.0) as usize;

    let (p0, yaw0) = initial_pose(&sc.program);
    let initial = SimState::hover(&params, &sc.actuators, p0, yaw0);
    let mut sim = Simulation::new(
        params.clone(),
        sc.aero.clone(),
        sc.actuators.clone(),
        sc.wind.clone(),
        sc.noise.clone(),
        sc.dt,
        sc.seed,
        initial,
    )?;

    let mut ctrl_cfg = sc.controller.clone();
    // The thrust envelope tracks the actuator limits.
    ctrl_cfg.f_max = 4.0 * sc.allocator.thrust_max * params.eta.cos();
    let mut controller = Controller::new(ctrl_cfg, &params);

    let mut delta_last: Vector6 = sc.allocator.hover_delta(&params);
    let mut warm: Option<WarmStart> = None;
    let mut sigma_prev = sigma_commands(&delta_last, &sc.actuators, &params);
    let mut energy = EnergyAccumulator::new();
    let mut log = LogWriter::new();

    // Metric accumulators.
    let maneuver_start = sc.program.transition_start();
    let threshold = sc.transition_airspeed;
    let windows = sc.program.arc_windows();
    let mut transition_time: Option<f64> = None;
    let mut max_alt_err: f64 = 0.0;
    let mut pos_sq_sum = 0.0;
    let mut pos_samples = 0usize;
    let mut slip_hi = (0.0f64, 0.0f64, 0usize); // (sum sq, peak, n)
    let mut slip_lo = (0.0f64, 0.0f64, 0usize);
    let mut thrust_var_sum = 0.0;
    let mut power_sum = 0.0;
    let mut cycles = 0usize;
    let mut aborted: Option<String> = None;
    let mut final_airspeed = 0.0;

    let n_cycles = (sc.duration * sc.control_rate).round() as usize;
    'run: for cycle in 0..n_cycles {
        let t = cycle as f64 * dt_ctrl;
        let meas = sim.measure();
        final_airspeed = meas.air.speed;

        // Setpoint for this cycle.
        let setpoint = match &sc.program {
            Program::Hover { position } => Setpoint::Trajectory {
                position: Vector3::from(*position),
                velocity: Vector3::zeros(),
                acceleration: Vector3::zeros(),
            },
            Program::Trajectory(tr) => {
                let s = tr.sample(t);
                Setpoint::Trajectory {
                    position: s.position,
                    velocity: s.velocity,
                    acceleration: s.acceleration,
                }
            }
            Program::PitchStep { hover_s, pitch, altitude } => {
                if t < *hover_s {
                    Setpoint::Trajectory {
                        position: Vector3::new(p0.x, p0.y, -altitude),
                        velocity: Vector3::zeros(),
                        acceleration: Vector3::zeros(),
                    }
                } else {
                    Setpoint::AttitudeStep {
                        roll: 0.0,
                        pitch: *pitch,
                        yaw: yaw0,
                        hold_z: -altitude,
                    }
                }
            }
        };

        let (out, dbg) = controller.update(&meas, &setpoint, &params, &sc.aero, dt_ctrl);

        // Allocation at the measured flight condition.
        let q_dyn = meas.air.dynamic_pressure(params.rho);
        let eff = build_effectiveness(&params, &sc.aero, q_dyn);
        let problem = AllocationProblem::from_demand(
            &eff,
            out.f_d,
            &out.m_d,
            &meas.air,
            &meas.omega_lifting,
            &params,
            &sc.aero,
            &sc.allocator,
            &delta_last,
            dt_ctrl,
        );
        let alloc = match allocate(&problem, warm.as_ref()) {
            Ok(a) => a,
            Err(e) => {
                aborted = Some(format!("allocation failed at t = {t:.3}: {e}"));
                break 'run;
            }
        };
        delta_last = alloc.delta;
        warm = Some(alloc.warm_start());

        let sigma = sigma_commands(&alloc.delta, &sc.actuators, &params);
        let mut sigma_dot = [0.0; 4];
        for i in 0..4 {
            sigma_dot[i] = (sigma[i] - sigma_prev[i]) / dt_ctrl;
        }
        let per_motor = sc.power.motor_power(
            &[sigma[0], sigma[1], sigma[2], sigma[3]],
            &sigma_dot,
        );
        let p_total: f64 = per_motor.iter().sum();
        energy.add(p_total, dt_ctrl);
        power_sum += p_total;
        sigma_prev = sigma;

        // Metrics.
        cycles += 1;
        let state = sim.state();
        match &setpoint {
            Setpoint::Trajectory { position, .. } => {
                pos_sq_sum += (state.position - position).norm_squared();
                pos_samples += 1;
            }
            Setpoint::AttitudeStep { hold_z, .. } => {
                max_alt_err = max_alt_err.max((state.position.z - hold_z).abs());
            }
        }
        if let Some(start) = maneuver_start {
            if t >= start && transition_time.is_none() && meas.air.speed > threshold {
                transition_time = Some(t - start);
            }
        }
        if let Some(w) = windows.first() {
            if t >= w.0 && t < w.1 {
                slip_hi.0 += meas.air.beta * meas.air.beta;
                slip_hi.1 = slip_hi.1.max(meas.air.beta.abs());
                slip_hi.2 += 1;
            }
        }
        if let Some(w) = windows.get(1) {
            if t >= w.0 && t < w.1 {
                slip_lo.0 += meas.air.beta * meas.air.beta;
                slip_lo.1 = slip_lo.1.max(meas.air.beta.abs());
                slip_lo.2 += 1;
            }
        }
        let mean_t = (alloc.delta[0] + alloc.delta[1] + alloc.delta[2] + alloc.delta[3]) / 4.0;
        thrust_var_sum += (0..4)
            .map(|i| (alloc.delta[i] - mean_t) * (alloc.delta[i] - mean_t))
            .sum::<f64>()
            / 4.0;

        if cycle % sc.log_decimation == 0 {
            let e = EulerZxy::from_quaternion(&state.attitude);
            let thr = state.actuators.thrusts(&params);
            let row = [
                state.t,
                state.position.x,
                state.position.y,
                state.position.z,
                state.velocity.x,
                state.velocity.y,
                state.velocity.z,
                e.roll,
                e.pitch,
                e.yaw,
                state.omega_lifting.x,
                state.omega_lifting.y,
                state.omega_lifting.z,
                meas.air.alpha,
                meas.air.beta,
                meas.air.speed,
                thr[0],
                thr[1],
                thr[2],
                thr[3],
                state.actuators.aileron[0],
                state.actuators.aileron[1],
                sigma[0],
                sigma[1],
                sigma[2],
                sigma[3],
                per_motor[0],
                per_motor[1],
                per_motor[2],
                per_motor[3],
                dbg.u_d.x,
                dbg.u_d.y,
                dbg.u_d.z,
                dbg.f_d,
                dbg.roll_d,
                dbg.pitch_d,
                dbg.yaw_d,
                dbg.omega_d.x,
                dbg.omega_d.y,
                dbg.omega_d.z,
                dbg.m_d.x,
                dbg.m_d.y,
                dbg.m_d.z,
                dbg.ct_weight,
                alloc.residual.norm(),
            ];
            log.row(&row, alloc.iterations, alloc.active_bitmask());
        }

        for _ in 0..n_sub {
            if let Err(e) = sim.step(&sigma) {
                aborted = Some(e.to_string());
                break 'run;
            }
        }
    }

    let elapsed = cycles as f64 * dt_ctrl;
    let rms = |acc: (f64, f64, usize)| {
        if acc.2 > 0 {
            Some((acc.0 / acc.2 as f64).sqrt())
        } else {
            None
        }
    };
    let metrics = ScenarioMetrics {
        schema: METRICS_SCHEMA,
        name: sc.name.clone(),
        family: sc.family.clone(),
        seed: sc.seed,
        elapsed,
        transition_time,
        max_altitude_error: if maneuver_start.is_some() { Some(max_alt_err) } else { None },
        position_rms: if pos_samples > 0 {
            Some((pos_sq_sum / pos_samples as f64).sqrt())
        } else {
            None
        },
        sideslip_rms_high: rms(slip_hi),
        sideslip_peak_high: if slip_hi.2 > 0 { Some(slip_hi.1) } else { None },
        sideslip_rms_low: rms(slip_lo),
        sideslip_peak_low: if slip_lo.2 > 0 { Some(slip_lo.1) } else { None },
        total_energy: energy.total(),
        mean_power: if cycles > 0 { power_sum / cycles as f64 } else { 0.0 },
        rotor_thrust_variance: if cycles > 0 { thrust_var_sum / cycles as f64 } else { 0.0 },
        final_airspeed,
        aborted,
    };
    Ok(RunOutput { metrics, log: log.finish() })
}

fn initial_pose(program: &Program) -> (Vector3<f64>, f64) {
    match program {
        Program::Hover { position } => (Vector3::from(*position), 0.0),
        Program::Trajectory(tr) => {
            let s = tr.sample(0.0);
            (s.position, 0.0)
        }
        Program::PitchStep { altitude, .. } => (Vector3::new(0.0, 0.0, -altitude), 0.0),
    }
}

/// Unit commands for an actuator vector: throttles holding each thrust and
/// servo commands holding each deflection.
pub fn sigma_commands(
    delta: &Vector6,
    model: &crate::vehicle::ActuatorModel,
    params: &crate::vehicle::VehicleParams,
) -> [f64; 6] {
    [
        model.throttle_for_thrust(delta[0], params),
        model.throttle_for_thrust(delta[1], params),
        model.throttle_for_thrust(delta[2], params),
        model.throttle_for_thrust(delta[3], params),
        model.command_for_deflection(delta[4]),
        model.command_for_deflection(delta[5]),
    ]
}
