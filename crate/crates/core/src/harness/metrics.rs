//! Scenario metrics and paired run comparison.

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

/// Summary metrics of one scenario run. Serialized as the
/// `<name>.metrics.json` artifact next to the trajectory log.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioMetrics {
    /// Metrics schema version.
    pub schema: u32,
    pub name: String,
    pub family: String,
    pub seed: u64,
    /// Simulated time actually covered, s.
    pub elapsed: f64,
    /// Time from maneuver start until airspeed first exceeds the threshold.
    pub transition_time: Option<f64>,
    /// Largest altitude deviation from the hold reference after the
    /// maneuver start, m.
    pub max_altitude_error: Option<f64>,
    /// RMS position tracking error against the reference, m.
    pub position_rms: Option<f64>,
    /// Sideslip RMS/peak inside the high-speed turn window, rad.
    pub sideslip_rms_high: Option<f64>,
    pub sideslip_peak_high: Option<f64>,
    /// Sideslip RMS/peak inside the low-speed turn window, rad.
    pub sideslip_rms_low: Option<f64>,
    pub sideslip_peak_low: Option<f64>,
    /// Trapezoidal motor energy, J.
    pub total_energy: f64,
    /// Mean electrical power, W.
    pub mean_power: f64,
    /// Time-mean of the instantaneous variance across the four rotor
    /// thrusts, N^2.
    pub rotor_thrust_variance: f64,
    /// Airspeed at the end of the run, m/s.
    pub final_airspeed: f64,
    /// Set when the run aborted early (message), with partial metrics kept.
    pub aborted: Option<String>,
}

pub const METRICS_SCHEMA: u32 = 1;

/// One pass/fail check inside a comparison report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

/// Paired comparison of two runs of the same scenario family.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub family: String,
    pub a: String,
    pub b: String,
    pub checks: Vec<Check>,
    pub pass: bool,
}

fn check(name: &str, pass: bool, detail: String) -> Check {
    Check { name: name.to_string(), pass, detail }
}

/// Compare two runs and judge the family's declared orderings.
///
/// Families:
/// * `energy-low` — energies must agree within 3% (ailerons idle at low speed);
/// * `energy-high` — run `a` (with ailerons) must use at least 5% less energy;
/// * `ct` — run `a` (coordinated turn on) must at least halve the
///   high-speed-turn sideslip RMS; low-speed values are reported only;
/// * `transition` — transition time of `a` must be strictly smaller;
/// * anything else — metrics must match exactly (replay check).
pub fn compare_runs(
    a: &ScenarioMetrics,
    b: &ScenarioMetrics,
) -> Result<ComparisonReport, ConfigError> {
    if a.family != b.family {
        return Err(ConfigError::new(format!(
            "mismatched scenario families: {} vs {}",
            a.family, b.family
        )));
    }
    let mut checks = Vec::new();
    match a.family.as_str() {
        "energy-low" => {
            let rel = (a.total_energy - b.total_energy).abs() / b.total_energy.max(1e-9);
            checks.push(check(
                "energy-within-3pct",
                rel < 0.03,
                format!("E_a = {:.1} J, E_b = {:.1} J, rel = {:.4}", a.total_energy, b.total_energy, rel),
            ));
        }
        "energy-high" => {
            let rel = (b.total_energy - a.total_energy) / b.total_energy.max(1e-9);
            checks.push(check(
                "energy-saving-ge-5pct",
                rel >= 0.05,
                format!(
                    "E_with = {:.1} J, E_without = {:.1} J, saving = {:.2}%",
                    a.total_energy,
                    b.total_energy,
                    rel * 100.0
                ),
            ));
        }
        "ct" => {
            let (ra, rb) = (
                a.sideslip_rms_high.unwrap_or(f64::NAN),
                b.sideslip_rms_high.unwrap_or(f64::NAN),
            );
            checks.push(check(
                "high-speed-sideslip-halved",
                ra.is_finite() && rb.is_finite() && ra < 0.5 * rb,
                format!("rms_with = {:.4} rad, rms_without = {:.4} rad", ra, rb),
            ));
            checks.push(check(
                "low-speed-sideslip-reported",
                true,
                format!(
                    "rms_with = {:.4} rad, rms_without = {:.4} rad",
                    a.sideslip_rms_low.unwrap_or(f64::NAN),
                    b.sideslip_rms_low.unwrap_or(f64::NAN)
                ),
            ));
        }
        "transition" => {
            let (ta, tb) = (a.transition_time, b.transition_time);
            let pass = matches!((ta, tb), (Some(x), Some(y)) if x < y);
            checks.push(check(
                "transition-strictly-faster",
                pass,
                format!("t_a = {ta:?} s, t_b = {tb:?} s"),
            ));
        }
        _ => {
            let same = a.total_energy == b.total_energy
                && a.position_rms == b.position_rms
                && a.final_airspeed == b.final_airspeed;
            checks.push(check("identical-metrics", same, "replay comparison".to_string()));
        }
    }
    let pass = checks.iter().all(|c| c.pass);
    Ok(ComparisonReport {
        family: a.family.clone(),
        a: a.name.clone(),
        b: b.name.clone(),
        checks,
        pass,
    })
}
