//! Small linear-algebra helpers shared across modules.

use nalgebra::{Matrix3, Quaternion, Vector3};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;
pub type Quat = Quaternion<f64>;

pub const QUAT_EPS: f64 = 1e-12;

pub fn identity_quat() -> Quat {
    Quaternion::new(1.0, 0.0, 0.0, 0.0)
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Numerically stable softmax of six logits.
pub fn softmax6(logits: &[f64; 6]) -> [f64; 6] {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = [0.0; 6];
    let mut sum = 0.0;
    for (o, &l) in out.iter_mut().zip(logits) {
        *o = (l - m).exp();
        sum += *o;
    }
    for o in &mut out {
        *o /= sum;
    }
    out
}

/// Rotation matrix of a unit quaternion (w, x, y, z).
pub fn rotation_from_unit(w: f64, x: f64, y: f64, z: f64) -> Mat3 {
    Matrix3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    )
}

/// Rotation matrix of an arbitrary non-zero quaternion; `None` if its norm is below [`QUAT_EPS`].
pub fn rotation_matrix(q: &Quat) -> Option<Mat3> {
    let n = q.norm();
    if n <= QUAT_EPS {
        return None;
    }
    Some(rotation_from_unit(q.w / n, q.i / n, q.j / n, q.k / n))
}

/// Quaternion of a proper rotation matrix, largest-diagonal branch, sign fixed so that w >= 0.
pub fn quat_from_rotation(m: &Mat3) -> Quat {
    let trace = m[(0, 0)] + m[(1, 1)] + m[(2, 2)];
    let (w, x, y, z);
    if trace > m[(0, 0)] && trace > m[(1, 1)] && trace > m[(2, 2)] {
        let s = (1.0 + trace).sqrt() * 2.0;
        w = 0.25 * s;
        x = (m[(2, 1)] - m[(1, 2)]) / s;
        y = (m[(0, 2)] - m[(2, 0)]) / s;
        z = (m[(1, 0)] - m[(0, 1)]) / s;
    } else if m[(0, 0)] > m[(1, 1)] && m[(0, 0)] > m[(2, 2)] {
        let s = (1.0 + m[(0, 0)] - m[(1, 1)] - m[(2, 2)]).sqrt() * 2.0;
        w = (m[(2, 1)] - m[(1, 2)]) / s;
        x = 0.25 * s;
        y = (m[(0, 1)] + m[(1, 0)]) / s;
        z = (m[(0, 2)] + m[(2, 0)]) / s;
    } else if m[(1, 1)] > m[(2, 2)] {
        let s = (1.0 + m[(1, 1)] - m[(0, 0)] - m[(2, 2)]).sqrt() * 2.0;
        w = (m[(0, 2)] - m[(2, 0)]) / s;
        x = (m[(0, 1)] + m[(1, 0)]) / s;
        y = 0.25 * s;
        z = (m[(1, 2)] + m[(2, 1)]) / s;
    } else {
        let s = (1.0 + m[(2, 2)] - m[(0, 0)] - m[(1, 1)]).sqrt() * 2.0;
        w = (m[(1, 0)] - m[(0, 1)]) / s;
        x = (m[(0, 2)] + m[(2, 0)]) / s;
        y = (m[(1, 2)] + m[(2, 1)]) / s;
        z = 0.25 * s;
    }
    let q = Quaternion::new(w, x, y, z);
    let q = q / q.norm();
    if q.w < 0.0 {
        -q
    } else {
        q
    }
}

/// Hamilton product a * b.
pub fn quat_mul(a: &Quat, b: &Quat) -> Quat {
    a * b
}

pub fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}
