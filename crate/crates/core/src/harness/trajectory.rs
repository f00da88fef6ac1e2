//! Analytic reference trajectories.
//!
//! References are piecewise segments with closed-form position, velocity,
//! and acceleration: straight speed ramps, constant-speed cruise, and
//! constant-rate turns. Speed is continuous across junctions; acceleration
//! is piecewise constant (tangent junctions, no clothoids).

use nalgebra::Vector3;

#[derive(Debug, Clone, Copy)]
pub enum Segment {
    /// Straight line, linear speed change at `accel` (signed).
    Ramp { accel: f64 },
    /// Straight line at constant speed.
    Cruise,
    /// Constant-speed turn at yaw rate `omega` (positive = clockwise from
    /// above in the z-down frame).
    Arc { omega: f64 },
}

#[derive(Debug, Clone, Copy)]
struct PhaseStart {
    t: f64,
    x: f64,
    y: f64,
    heading: f64,
    speed: f64,
}

/// Sample of the reference at one instant.
#[derive(Debug, Clone, Copy)]
pub struct ReferenceSample {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub acceleration: Vector3<f64>,
}

/// Piecewise-analytic planar reference at constant altitude.
#[derive(Debug, Clone)]
pub struct Trajectory {
    phases: Vec<(Segment, f64)>,
    starts: Vec<PhaseStart>,
    /// Earth-frame z of the path (negative = above ground).
    pub z: f64,
}

impl Trajectory {
    /// Build from segments with durations, starting at the origin heading +x.
    pub fn new(phases: Vec<(Segment, f64)>, z: f64, initial_speed: f64) -> Self {
        let mut starts = Vec::with_capacity(phases.len());
        let mut s = PhaseStart { t: 0.0, x: 0.0, y: 0.0, heading: 0.0, speed: initial_speed };
        for (seg, dur) in &phases {
            starts.push(s);
            s = advance(&s, seg, *dur);
        }
        Self { phases, starts, z }
    }

    /// Reference sample at time `t`; the final segment extends indefinitely.
    pub fn sample(&self, t: f64) -> ReferenceSample {
        if self.phases.is_empty() {
            return ReferenceSample {
                position: Vector3::new(0.0, 0.0, self.z),
                velocity: Vector3::zeros(),
                acceleration: Vector3::zeros(),
            };
        }
        let mut idx = self.phases.len() - 1;
        for (i, start) in self.starts.iter().enumerate() {
            let end = start.t + self.phases[i].1;
            if t < end {
                idx = i;
                break;
            }
        }
        let start = &self.starts[idx];
        let tau = (t - start.t).max(0.0);
        sample_segment(start, &self.phases[idx].0, tau, self.z)
    }

    /// Start/end times of each `Arc` segment, in order.
    pub fn arc_windows(&self) -> Vec<(f64, f64)> {
        self.phases
            .iter()
            .zip(&self.starts)
            .filter_map(|((seg, dur), start)| match seg {
                Segment::Arc { .. } => Some((start.t, start.t + dur)),
                _ => None,
            })
            .collect()
    }
}

fn advance(s: &PhaseStart, seg: &Segment, dur: f64) -> PhaseStart {
    let (sh, ch) = s.heading.sin_cos();
    match seg {
        Segment::Ramp { accel } => {
            let dist = s.speed * dur + 0.5 * accel * dur * dur;
            PhaseStart {
                t: s.t + dur,
                x: s.x + dist * ch,
                y: s.y + dist * sh,
                heading: s.heading,
                speed: (s.speed + accel * dur).max(0.0),
            }
        }
        Segment::Cruise => PhaseStart {
            t: s.t + dur,
            x: s.x + s.speed * dur * ch,
            y: s.y + s.speed * dur * sh,
            heading: s.heading,
            speed: s.speed,
        },
        Segment::Arc { omega } => {
            let h1 = s.heading + omega * dur;
            let r = s.speed / omega;
            PhaseStart {
                t: s.t + dur,
                x: s.x + r * (h1.sin() - s.heading.sin()),
                y: s.y - r * (h1.cos() - s.heading.cos()),
                heading: h1,
                speed: s.speed,
            }
        }
    }
}

fn sample_segment(start: &PhaseStart, seg: &Segment, tau: f64, z: f64) -> ReferenceSample {
    let (sh, ch) = start.heading.sin_cos();
    match seg {
        Segment::Ramp { accel } => {
            let v = (start.speed + accel * tau).max(0.0);
            let dist = start.speed * tau + 0.5 * accel * tau * tau;
            ReferenceSample {
                position: Vector3::new(start.x + dist * ch, start.y + dist * sh, z),
                velocity: Vector3::new(v * ch, v * sh, 0.0),
                acceleration: Vector3::new(accel * ch, accel * sh, 0.0),
            }
        }
        Segment::Cruise => ReferenceSample {
            position: Vector3::new(
                start.x + start.speed * tau * ch,
                start.y + start.speed * tau * sh,
                z,
            ),
            velocity: Vector3::new(start.speed * ch, start.speed * sh, 0.0),
            acceleration: Vector3::zeros(),
        },
        Segment::Arc { omega } => {
            let h = start.heading + omega * tau;
            let (shh, chh) = h.sin_cos();
            let r = start.speed / omega;
            ReferenceSample {
                position: Vector3::new(
                    start.x + r * (shh - sh),
                    start.y - r * (chh - ch),
                    z,
                ),
                velocity: Vector3::new(start.speed * chh, start.speed * shh, 0.0),
                acceleration: Vector3::new(
                    -start.speed * omega * shh,
                    start.speed * omega * chh,
                    0.0,
                ),
            }
        }
    }
}

/// Straight run-in blending into a constant-speed circle.
///
/// Ramp from standstill to `speed`, cruise `line_s` seconds, then turn on a
/// circle of the given radius until the scenario ends.
pub fn line_circle(speed: f64, radius: f64, accel: f64, line_s: f64, altitude: f64) -> Trajectory {
    assert!(speed > 0.0 && radius > 0.0 && accel > 0.0);
    let ramp = speed / accel;
    Trajectory::new(
        vec![
            (Segment::Ramp { accel }, ramp),
            (Segment::Cruise, line_s),
            (Segment::Arc { omega: speed / radius }, 1e9),
        ],
        -altitude,
        0.0,
    )
}

/// Two-speed turn course: a turn at high speed, a deceleration leg, then the
/// same heading change at low speed.
#[allow(clippy::too_many_arguments)]
pub fn turn_legs(
    high_speed: f64,
    low_speed: f64,
    high_radius: f64,
    low_radius: f64,
    turn_angle: f64,
    leg_s: f64,
    accel: f64,
    altitude: f64,
) -> Trajectory {
    assert!(high_speed > low_speed && low_speed > 0.0);
    let w_hi = high_speed / high_radius;
    let w_lo = low_speed / low_radius;
    Trajectory::new(
        vec![
            (Segment::Ramp { accel }, high_speed / accel),
            (Segment::Cruise, leg_s),
            (Segment::Arc { omega: w_hi }, turn_angle / w_hi),
            (Segment::Cruise, leg_s),
            (Segment::Ramp { accel: -accel }, (high_speed - low_speed) / accel),
            (Segment::Cruise, leg_s),
            (Segment::Arc { omega: w_lo }, turn_angle / w_lo),
            (Segment::Cruise, 1e9),
        ],
        -altitude,
        0.0,
    )
}
