// scratch: find worst extraction-vs-scan instance and dump its landscape
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use liftwing_core::controller::{extract_attitude_thrust, predicted_accel};
use liftwing_core::vehicle::{AeroCoefficients, VehicleParams};

fn oracle(u_d: &Vector3<f64>, yaw: f64, va: f64, p: &VehicleParams, c: &AeroCoefficients, f_max: f64, tilt: f64) -> (f64, f64, f64, f64) {
    let q_dyn = 0.5 * p.rho * va * va;
    let eval = |pitch: f64, roll: f64| -> (f64, f64) {
        let cc = predicted_accel(0.0, pitch, roll, yaw, q_dyn, p, c);
        let d = cc - predicted_accel(1.0, pitch, roll, yaw, q_dyn, p, c);
        let den = d.norm_squared();
        let f = if den > 0.0 { ((cc - u_d).dot(&d) / den).clamp(0.0, f_max) } else { 0.0 };
        ((cc - f * d - u_d).norm(), f)
    };
    let mut best = (f64::INFINITY, 0.0, 0.0, 0.0);
    let mut span = tilt;
    let mut center = (0.0, 0.0);
    let mut step = 0.01;
    loop {
        let n = (2.0 * span / step).ceil() as i64;
        for i in 0..=n {
            let pitch = (center.0 - span + i as f64 * step).clamp(-tilt, tilt);
            for j in 0..=n {
                let roll = (center.1 - span + j as f64 * step).clamp(-tilt, tilt);
                let (r, f) = eval(pitch, roll);
                if r < best.0 { best = (r, pitch, roll, f); }
            }
        }
        if step <= 1e-4 { break; }
        center = (best.1, best.2);
        span = 2.0 * step;
        step /= 10.0;
    }
    best
}

fn main() {
    let p = VehicleParams::default();
    let c = AeroCoefficients::default();
    let f_max = 4.0 * 12.0 * p.eta.cos();
    let tilt = 0.9;
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut worst = (0.0, Vector3::zeros(), 0.0, 0.0);
    for _ in 0..1000 {
        let u_d = Vector3::new(rng.gen_range(-6.0..6.0), rng.gen_range(-6.0..6.0), -9.81 + rng.gen_range(-8.0..5.0));
        let yaw = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
        let va = rng.gen_range(0.0..25.0);
        let res = extract_attitude_thrust(&u_d, yaw, va, &p, &c, f_max, tilt, None);
        let (orr, _, _, _) = oracle(&u_d, yaw, va, &p, &c, f_max, tilt);
        let gap = res.residual - orr;
        if gap > worst.0 { worst = (gap, u_d, yaw, va); }
    }
    let (gap, u_d, yaw, va) = worst;
    println!("worst gap {gap:.3e} at u_d={u_d:?} yaw={yaw:.3} va={va:.2}");
    let res = extract_attitude_thrust(&u_d, yaw, va, &p, &c, f_max, tilt, None);
    let (orr, opitch, oroll, of) = oracle(&u_d, yaw, va, &p, &c, f_max, tilt);
    println!("impl: r={:.6} f={:.3} pitch={:.4} roll={:.4}", res.residual, res.f_d, res.pitch_d, res.roll_d);
    println!("orac: r={orr:.6} f={of:.3} pitch={opitch:.4} roll={oroll:.4}");
}
