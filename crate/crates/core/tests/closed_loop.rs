//! Closed-loop regression checks of the full stack.

use liftwing_core::harness::{run_scenario, stock};

#[test]
fn hover_holds_position() {
    let sc = stock::hover(30.0);
    let out = run_scenario(&sc).unwrap();
    let m = &out.metrics;
    assert!(m.aborted.is_none(), "aborted: {:?}", m.aborted);
    assert!(
        m.position_rms.unwrap() < 0.05,
        "hover position rms {} m",
        m.position_rms.unwrap()
    );
    assert!(m.total_energy > 0.0);
    assert!(m.sideslip_rms_high.is_none());
}

#[test]
fn hover_log_is_replayable() {
    let sc = stock::hover(2.0);
    let a = run_scenario(&sc).unwrap();
    let b = run_scenario(&sc).unwrap();
    assert_eq!(a.log, b.log);
    assert_eq!(a.metrics.total_energy, b.metrics.total_energy);
}
