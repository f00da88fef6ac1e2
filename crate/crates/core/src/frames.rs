//! Rotation and frame-conversion math shared by the whole stack.
//!
//! Four right-handed frames are used throughout:
//!
//! * **earth** — inertial, z down;
//! * **body** — fixed to the quadcopter component, x nose, z down;
//! * **lifting** — fixed to the wing, pitched up from the body by the
//!   installation angle `kappa` about the shared y axis;
//! * **wind** — x along the airspeed vector.
//!
//! Attitude is carried as a body-to-earth unit quaternion. Euler angles use
//! the ZXY sequence (yaw about z, then roll about x, then pitch about y), so
//! the body-to-earth matrix is `Rz(psi) * Rx(phi) * Ry(theta)`. Pitch is the
//! unbounded angle; gimbal lock sits at `|roll| = pi/2`.

use nalgebra::{Matrix3, UnitQuaternion, Vector3};

/// Euler angles in the ZXY rotation sequence, radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerZxy {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl EulerZxy {
    pub fn new(roll: f64, pitch: f64, yaw: f64) -> Self {
        Self { roll, pitch, yaw }
    }

    /// Body-to-earth quaternion for this attitude: `qz(yaw) * qx(roll) * qy(pitch)`.
    pub fn to_quaternion(&self) -> UnitQuaternion<f64> {
        let qz = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), self.yaw);
        let qx = UnitQuaternion::from_axis_angle(&Vector3::x_axis(), self.roll);
        let qy = UnitQuaternion::from_axis_angle(&Vector3::y_axis(), self.pitch);
        renormalize(qz * qx * qy)
    }

    /// Extract ZXY angles from a body-to-earth quaternion.
    ///
    /// Away from gimbal lock (`|roll| < pi/2`) this inverts
    /// [`EulerZxy::to_quaternion`]; at the singularity pitch and yaw are
    /// resolved by convention (pitch carries the free rotation).
    pub fn from_quaternion(q: &UnitQuaternion<f64>) -> Self {
        let r = rot_body_to_earth(q);
        let s_roll = r[(2, 1)].clamp(-1.0, 1.0);
        let roll = s_roll.asin();
        if s_roll.abs() > 1.0 - 1e-12 {
            // Gimbal lock: only roll +/- (pitch ± yaw) observable.
            let pitch = f64::atan2(r[(0, 2)], r[(0, 0)]);
            return Self { roll, pitch, yaw: 0.0 };
        }
        let pitch = f64::atan2(-r[(2, 0)], r[(2, 2)]);
        let yaw = f64::atan2(-r[(0, 1)], r[(1, 1)]);
        Self { roll, pitch, yaw }
    }
}

/// Wind-to-body rotation for tilt angle `lambda = kappa - alpha` and sideslip `beta`.
pub fn rot_wind_to_body(lambda: f64, beta: f64) -> Matrix3<f64> {
    let (sl, cl) = lambda.sin_cos();
    let (sb, cb) = beta.sin_cos();
    Matrix3::new(
        cl * cb, -cl * sb, sl, //
        sb, cb, 0.0, //
        -sl * cb, sl * sb, cl,
    )
}

/// Lifting-to-body rotation: a constant pitch-up by the installation angle `kappa`.
pub fn rot_lifting_to_body(kappa: f64) -> Matrix3<f64> {
    let (sk, ck) = kappa.sin_cos();
    Matrix3::new(
        ck, 0.0, sk, //
        0.0, 1.0, 0.0, //
        -sk, 0.0, ck,
    )
}

/// Body-to-earth rotation matrix of a body-to-earth quaternion.
pub fn rot_body_to_earth(q: &UnitQuaternion<f64>) -> Matrix3<f64> {
    q.to_rotation_matrix().into_inner()
}

/// Attitude error quaternion `q_e = q_d* ⊗ q`, renormalized.
pub fn quat_error(q_d: &UnitQuaternion<f64>, q: &UnitQuaternion<f64>) -> UnitQuaternion<f64> {
    renormalize(q_d.inverse() * q)
}

/// Shortest-path axis-angle vector of an error quaternion, `‖ξ‖ ≤ π`.
///
/// The full rotation angle is folded into `[-π, π)` so the returned vector
/// always points along the shorter of the two rotation directions; the tie at
/// exactly 180° resolves through `sign(0) = +1`.
pub fn axis_angle_error(q_e: &UnitQuaternion<f64>) -> Vector3<f64> {
    let w = q_e.w.clamp(-1.0, 1.0);
    let v = Vector3::new(q_e.i, q_e.j, q_e.k);
    let theta = wrap_pi(2.0 * w.acos());
    if theta == 0.0 {
        return Vector3::zeros();
    }
    let sign = if w >= 0.0 { 1.0 } else { -1.0 };
    let half_sin = (theta / 2.0).sin();
    if half_sin.abs() < 1e-12 {
        // theta -> 0 limit of theta / sin(theta/2).
        return sign * 2.0 * v;
    }
    sign * (theta / half_sin) * v
}

/// Wrap an angle into `[-π, π)`; ties at `+π` map to `-π`.
pub fn wrap_pi(angle: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let wrapped = (angle + std::f64::consts::PI).rem_euclid(two_pi) - std::f64::consts::PI;
    if wrapped >= std::f64::consts::PI {
        wrapped - two_pi
    } else {
        wrapped
    }
}

/// Scalar clamp matching the elementwise saturation used by the controller.
pub fn sat(x: f64, lo: f64, hi: f64) -> f64 {
    debug_assert!(lo <= hi, "sat bounds out of order: [{lo}, {hi}]");
    x.clamp(lo, hi)
}

/// Elementwise vector saturation.
pub fn sat_vec(x: &Vector3<f64>, lo: &Vector3<f64>, hi: &Vector3<f64>) -> Vector3<f64> {
    Vector3::new(sat(x.x, lo.x, hi.x), sat(x.y, lo.y, hi.y), sat(x.z, lo.z, hi.z))
}

fn renormalize(q: UnitQuaternion<f64>) -> UnitQuaternion<f64> {
    UnitQuaternion::new_normalize(q.into_inner())
}
