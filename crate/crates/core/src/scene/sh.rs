//! Real spherical-harmonic basis up to degree 3, in the ordering and sign
//! convention used by trained 3DGS clouds.
//!
//! Coefficients are stored basis-major with RGB interleaved: `sh[3 * k + c]`
//! is the coefficient of basis function `k` for channel `c`.

use crate::error::{Error, Result};
use crate::math::Vec3;

pub const SH_C0: f64 = 0.282_094_791_773_878_14;
pub const SH_C1: f64 = 0.488_602_511_902_919_9;
pub const SH_C2: [f64; 5] = [
    1.092_548_430_592_079_2,
    -1.092_548_430_592_079_2,
    0.315_391_565_252_520_05,
    -1.092_548_430_592_079_2,
    0.546_274_215_296_039_6,
];
pub const SH_C3: [f64; 7] = [
    -0.590_043_589_926_643_5,
    2.890_611_442_640_554,
    -0.457_045_799_464_465_8,
    0.373_176_332_590_115_4,
    -0.457_045_799_464_465_8,
    1.445_305_721_320_277,
    -0.590_043_589_926_643_5,
];

pub const MAX_DEGREE: usize = 3;

/// Number of basis functions for a degree: (deg + 1)^2.
pub fn basis_count(degree: usize) -> usize {
    (degree + 1) * (degree + 1)
}

/// Total coefficient count for RGB at a degree: 3 (deg + 1)^2.
pub fn coeff_count(degree: usize) -> usize {
    3 * basis_count(degree)
}

/// Degree whose RGB coefficient count equals `len`, if any.
pub fn degree_for_len(len: usize) -> Option<usize> {
    (0..=MAX_DEGREE).find(|&d| coeff_count(d) == len)
}

/// Basis values at direction `d` (assumed unit length), written into `out[..(deg+1)^2]`.
pub fn eval_basis(degree: usize, d: &Vec3, out: &mut [f64]) {
    let (x, y, z) = (d.x, d.y, d.z);
    out[0] = SH_C0;
    if degree < 1 {
        return;
    }
    out[1] = -SH_C1 * y;
    out[2] = SH_C1 * z;
    out[3] = -SH_C1 * x;
    if degree < 2 {
        return;
    }
    let (xx, yy, zz) = (x * x, y * y, z * z);
    out[4] = SH_C2[0] * x * y;
    out[5] = SH_C2[1] * y * z;
    out[6] = SH_C2[2] * (2.0 * zz - xx - yy);
    out[7] = SH_C2[3] * x * z;
    out[8] = SH_C2[4] * (xx - yy);
    if degree < 3 {
        return;
    }
    out[9] = SH_C3[0] * y * (3.0 * xx - yy);
    out[10] = SH_C3[1] * x * y * z;
    out[11] = SH_C3[2] * y * (4.0 * zz - xx - yy);
    out[12] = SH_C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
    out[13] = SH_C3[4] * x * (4.0 * zz - xx - yy);
    out[14] = SH_C3[5] * z * (xx - yy);
    out[15] = SH_C3[6] * x * (xx - 3.0 * yy);
}

/// Partial derivatives of each basis polynomial with respect to (x, y, z),
/// treating the components as independent.
pub fn eval_basis_grad(degree: usize, d: &Vec3, out: &mut [Vec3]) {
    let (x, y, z) = (d.x, d.y, d.z);
    out[0] = Vec3::zeros();
    if degree < 1 {
        return;
    }
    out[1] = Vec3::new(0.0, -SH_C1, 0.0);
    out[2] = Vec3::new(0.0, 0.0, SH_C1);
    out[3] = Vec3::new(-SH_C1, 0.0, 0.0);
    if degree < 2 {
        return;
    }
    let (xx, yy, zz) = (x * x, y * y, z * z);
    out[4] = SH_C2[0] * Vec3::new(y, x, 0.0);
    out[5] = SH_C2[1] * Vec3::new(0.0, z, y);
    out[6] = SH_C2[2] * Vec3::new(-2.0 * x, -2.0 * y, 4.0 * z);
    out[7] = SH_C2[3] * Vec3::new(z, 0.0, x);
    out[8] = SH_C2[4] * Vec3::new(2.0 * x, -2.0 * y, 0.0);
    if degree < 3 {
        return;
    }
    out[9] = SH_C3[0] * Vec3::new(6.0 * x * y, 3.0 * xx - 3.0 * yy, 0.0);
    out[10] = SH_C3[1] * Vec3::new(y * z, x * z, x * y);
    out[11] = SH_C3[2] * Vec3::new(-2.0 * x * y, 4.0 * zz - xx - 3.0 * yy, 8.0 * y * z);
    out[12] = SH_C3[3] * Vec3::new(-6.0 * x * z, -6.0 * y * z, 6.0 * zz - 3.0 * xx - 3.0 * yy);
    out[13] = SH_C3[4] * Vec3::new(4.0 * zz - 3.0 * xx - yy, -2.0 * x * y, 8.0 * x * z);
    out[14] = SH_C3[5] * Vec3::new(2.0 * x * z, -2.0 * y * z, xx - yy);
    out[15] = SH_C3[6] * Vec3::new(3.0 * xx - 3.0 * yy, -6.0 * x * y, 0.0);
}

/// Raw SH sum per channel (before the +0.5 offset and clamp).
pub fn eval_raw(degree: usize, sh: &[f64], d: &Vec3) -> [f64; 3] {
    let mut basis = [0.0; 16];
    eval_basis(degree, d, &mut basis);
    let mut rgb = [0.0; 3];
    for (k, b) in basis.iter().take(basis_count(degree)).enumerate() {
        for (c, v) in rgb.iter_mut().enumerate() {
            *v += b * sh[3 * k + c];
        }
    }
    rgb
}

/// Emitted color: SH(view) + 0.5, clamped at zero per channel.
pub fn radiance(degree: usize, sh: &[f64], view_dir: &Vec3) -> Result<[f64; 3]> {
    let expected = coeff_count(degree);
    if degree > MAX_DEGREE || sh.len() != expected {
        return Err(Error::DegreeMismatch {
            degree,
            expected,
            got: sh.len(),
        });
    }
    let raw = eval_raw(degree, sh, view_dir);
    Ok(raw.map(|v| (v + 0.5).max(0.0)))
}
