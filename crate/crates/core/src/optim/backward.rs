//! Analytic gradients of the rendering loss with respect to every frosted
//! Gaussian parameter.

use nalgebra::{Matrix2, Matrix2x3};
use rayon::prelude::*;

use super::params::{self, LOGITS, OPACITY, ROTATION, SCALES, SH};
use crate::error::Result;
use crate::frosted::FrostedGaussian;
use crate::math::{self, Mat3, Vec3};
use crate::pipeline::{view_direction, FrostingScene};
use crate::render::metrics::rendering_loss_with_grad;
use crate::render::raster::{jacobian, make_splats, rasterize, rasterize_backward, SplatGrad};
use crate::render::{Camera, Image};
use crate::scene::sh;

/// Loss gradients in the flat layout of [`params`], `stride` values per Gaussian.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub stride: usize,
    pub values: Vec<f64>,
}

impl Gradients {
    pub fn of(&self, gaussian: usize) -> &[f64] {
        &self.values[gaussian * self.stride..(gaussian + 1) * self.stride]
    }
}

pub fn loss_only(scene: &FrostingScene, cam: &Camera, gt: &Image) -> Result<f64> {
    Ok(crate::render::rendering_loss(&scene.render(cam)?, gt))
}

/// Forward render, loss, and the full backward pass.
pub fn loss_and_gradients(scene: &FrostingScene, cam: &Camera, gt: &Image) -> Result<(f64, Gradients)> {
    let prepared = scene.prepare(cam)?;
    let out = rasterize(make_splats(&prepared, cam), cam, scene.background);
    let (loss, d_image) = rendering_loss_with_grad(&out.image, gt);
    let splat_grads = rasterize_backward(&out, cam, scene.background, &d_image);

    let mut per_gaussian: Vec<Option<SplatGrad>> = vec![None; scene.gaussians.len()];
    for (s, g) in out.splats.iter().zip(&splat_grads) {
        per_gaussian[s.source] = Some(*g);
    }
    let conics: Vec<Option<[f64; 3]>> = {
        let mut c = vec![None; scene.gaussians.len()];
        for s in &out.splats {
            c[s.source] = Some(s.conic);
        }
        c
    };

    let sh_len = sh::coeff_count(scene.sh_degree);
    let stride = params::stride(sh_len);
    let mut values = vec![0.0; scene.gaussians.len() * stride];
    let eye = cam.center();
    values
        .par_chunks_exact_mut(stride)
        .enumerate()
        .try_for_each(|(i, out)| -> Result<()> {
            if let (Some(sg), Some(conic)) = (per_gaussian[i], conics[i]) {
                let g = &scene.gaussians[i];
                let cell = scene.layer.cell(g.cell as usize)?;
                gaussian_backward(g, &cell.corners(), conic, &sg, cam, &eye, scene.sh_degree, out)?;
            }
            Ok(())
        })?;
    Ok((loss, Gradients { stride, values }))
}

/// dR/d(w, x, y, z) for a unit quaternion, contracted with `dr`.
fn rotation_backward(q: [f64; 4], dr: &Mat3) -> [f64; 4] {
    let [w, x, y, z] = q;
    let d = |r: usize, c: usize| dr[(r, c)];
    let dw = 2.0 * (-z * d(0, 1) + y * d(0, 2) + z * d(1, 0) - x * d(1, 2) - y * d(2, 0) + x * d(2, 1));
    let dx = 2.0 * (y * d(0, 1) + z * d(0, 2) + y * d(1, 0) - 2.0 * x * d(1, 1) - w * d(1, 2) + z * d(2, 0) + w * d(2, 1)
        - 2.0 * x * d(2, 2));
    let dy = 2.0 * (-2.0 * y * d(0, 0) + x * d(0, 1) + w * d(0, 2) + x * d(1, 0) + z * d(1, 2) - w * d(2, 0) + z * d(2, 1)
        - 2.0 * y * d(2, 2));
    let dz = 2.0 * (-2.0 * z * d(0, 0) - w * d(0, 1) + x * d(0, 2) + w * d(1, 0) - 2.0 * z * d(1, 1) + y * d(1, 2) + x * d(2, 0)
        + y * d(2, 1));
    [dw, dx, dy, dz]
}

#[allow(clippy::too_many_arguments)]
fn gaussian_backward(
    g: &FrostedGaussian,
    corners: &[Vec3; 6],
    conic: [f64; 3],
    sg: &SplatGrad,
    cam: &Camera,
    eye: &Vec3,
    degree: usize,
    out: &mut [f64],
) -> Result<()> {
    let w = g.barycentrics();
    let mean = position_in_cell_corners(corners, &w);
    let mut d_mean = Vec3::zeros();

    // Color through the SH evaluation and the view direction.
    let v = mean - eye;
    let dir = view_direction(&mean, eye);
    let residual = if g.residual_rotation == math::identity_quat() {
        None
    } else {
        math::rotation_matrix(&g.residual_rotation)
    };
    let local = residual.map_or(dir, |r| r.transpose() * dir);
    let nb = sh::basis_count(degree);
    let mut basis = [0.0; 16];
    sh::eval_basis(degree, &local, &mut basis);
    let raw = sh::eval_raw(degree, &g.sh, &local);
    let mut d_raw = [0.0; 3];
    for c in 0..3 {
        if raw[c] + 0.5 > 0.0 {
            d_raw[c] = sg.color[c];
        }
    }
    for k in 0..nb {
        for c in 0..3 {
            out[SH + 3 * k + c] = d_raw[c] * basis[k];
        }
    }
    if degree > 0 && d_raw != [0.0; 3] {
        let mut bgrad = [Vec3::zeros(); 16];
        sh::eval_basis_grad(degree, &local, &mut bgrad);
        let mut d_local = Vec3::zeros();
        for k in 1..nb {
            let s: f64 = (0..3).map(|c| d_raw[c] * g.sh[3 * k + c]).sum();
            d_local += bgrad[k] * s;
        }
        let d_dir = residual.map_or(d_local, |r| r * d_local);
        let n = v.norm();
        if n > 0.0 {
            d_mean += (d_dir - dir * dir.dot(&d_dir)) / n;
        }
    }

    // Opacity.
    let alpha = g.opacity();
    out[OPACITY] = sg.opacity * alpha * (1.0 - alpha);

    // Conic to 2D covariance: d(A⁻¹) = −A⁻¹ dA A⁻¹.
    let q = Matrix2::new(conic[0], conic[1], conic[1], conic[2]);
    let g_conic = Matrix2::new(sg.conic[0], 0.5 * sg.conic[1], 0.5 * sg.conic[1], sg.conic[2]);
    let g_cov2 = -(q * g_conic * q);

    // Projection.
    let t = cam.to_camera(&mean);
    let j: Matrix2x3<f64> = jacobian(cam, &t);
    let tm = j * cam.rotation;
    let r = g.rotation_matrix()?;
    let s = g.log_scales.map(f64::exp);
    let m = r * Mat3::from_diagonal(&s);
    let sigma = m * m.transpose();
    let g_sigma: Mat3 = tm.transpose() * g_cov2 * tm;
    let g_t = 2.0 * g_cov2 * tm * sigma;
    let g_j = g_t * cam.rotation.transpose();

    let (tx, ty, tz) = (t.x, t.y, t.z);
    let (fx, fy) = (cam.fx, cam.fy);
    let iz2 = 1.0 / (tz * tz);
    let iz3 = iz2 / tz;
    let mut d_t = Vec3::new(
        g_j[(0, 2)] * (-fx * iz2),
        g_j[(1, 2)] * (-fy * iz2),
        g_j[(0, 0)] * (-fx * iz2) + g_j[(0, 2)] * (2.0 * fx * tx * iz3) + g_j[(1, 1)] * (-fy * iz2)
            + g_j[(1, 2)] * (2.0 * fy * ty * iz3),
    );
    d_t.x += sg.mean[0] * fx / tz;
    d_t.y += sg.mean[1] * fy / tz;
    d_t.z += -sg.mean[0] * fx * tx * iz2 - sg.mean[1] * fy * ty * iz2;
    d_mean += cam.rotation.transpose() * d_t;

    // Σ = M Mᵀ with M = R diag(s).
    let g_m = (g_sigma + g_sigma.transpose()) * m;
    for jx in 0..3 {
        let ds: f64 = (0..3).map(|ix| g_m[(ix, jx)] * r[(ix, jx)]).sum();
        out[SCALES + jx] = ds * s[jx];
    }
    let g_r = g_m * Mat3::from_diagonal(&s);
    let norm = g.rotation.norm();
    let qn = [g.rotation.w / norm, g.rotation.i / norm, g.rotation.j / norm, g.rotation.k / norm];
    let d_qn = rotation_backward(qn, &g_r);
    let dot: f64 = (0..4).map(|k| qn[k] * d_qn[k]).sum();
    for k in 0..4 {
        out[ROTATION + k] = (d_qn[k] - qn[k] * dot) / norm;
    }

    // Softmax barycentrics.
    let d_w: [f64; 6] = std::array::from_fn(|k| corners[k].dot(&d_mean));
    let avg: f64 = (0..6).map(|k| w[k] * d_w[k]).sum();
    for k in 0..6 {
        out[LOGITS + k] = w[k] * (d_w[k] - avg);
    }
    Ok(())
}

fn position_in_cell_corners(corners: &[Vec3; 6], w: &[f64; 6]) -> Vec3 {
    (0..6).map(|k| corners[k] * w[k]).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotation_table_matches_finite_differences() {
        let q = [0.6, -0.3, 0.5, 0.2];
        let n = (q.iter().map(|v| v * v).sum::<f64>()).sqrt();
        let q = q.map(|v| v / n);
        let dr = Mat3::new(0.3, -1.0, 0.2, 0.7, 0.1, -0.4, 0.5, 0.9, -0.6);
        let analytic = rotation_backward(q, &dr);
        let eps = 1e-6;
        for k in 0..4 {
            let mut p = q;
            p[k] += eps;
            let mut m = q;
            m[k] -= eps;
            let rp = math::rotation_from_unit(p[0], p[1], p[2], p[3]);
            let rm = math::rotation_from_unit(m[0], m[1], m[2], m[3]);
            let fd = ((rp - rm) / (2.0 * eps)).component_mul(&dr).sum();
            assert!((fd - analytic[k]).abs() < 1e-8, "{k}: {fd} vs {}", analytic[k]);
        }
    }
}
