//! Gaussians bound to prismatic cells through six barycentric logits, and the
//! transfer of their shape when the cells deform.

use nalgebra::Matrix3;

use crate::cells::{FrostingLayer, PrismaticCell};
use crate::error::{Error, Result};
use crate::math::{self, quat_from_rotation, softmax6, Mat3, Quat, Vec3};
use crate::scene::{covariance_from, sh};

#[derive(Debug, Clone, PartialEq)]
pub struct FrostedGaussian {
    pub cell: u32,
    /// Softmax inputs for (b0, b1, b2, β0, β1, β2): outer corners first.
    pub bary_logits: [f64; 6],
    pub log_scales: Vec3,
    pub rotation: Quat,
    pub opacity_logit: f64,
    pub sh: Vec<f64>,
    /// Accumulated rotation from deformation transfer, applied inversely to view directions.
    pub residual_rotation: Quat,
}

impl FrostedGaussian {
    pub fn barycentrics(&self) -> [f64; 6] {
        softmax6(&self.bary_logits)
    }

    pub fn opacity(&self) -> f64 {
        math::sigmoid(self.opacity_logit)
    }

    pub fn rotation_matrix(&self) -> Result<Mat3> {
        math::rotation_matrix(&self.rotation).ok_or(Error::ZeroQuaternion)
    }

    pub fn covariance(&self) -> Result<Mat3> {
        Ok(covariance_from(
            &self.rotation_matrix()?,
            &self.log_scales.map(f64::exp),
        ))
    }

    pub fn position(&self, layer: &FrostingLayer) -> Result<Vec3> {
        position(self, layer)
    }
}

pub fn barycentrics(g: &FrostedGaussian) -> [f64; 6] {
    g.barycentrics()
}

/// μ = Σ_k w_k · corner_k.
pub fn position_in_cell(cell: &PrismaticCell, w: &[f64; 6]) -> Vec3 {
    (0..6).map(|k| cell.corner(k) * w[k]).sum()
}

pub fn position(g: &FrostedGaussian, layer: &FrostingLayer) -> Result<Vec3> {
    let cell = layer.cell(g.cell as usize)?;
    Ok(position_in_cell(cell, &g.barycentrics()))
}

/// Local transform at one cell corner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CornerTransform {
    /// Rotation part (polar decomposition) of `linear`.
    pub rotation: Quat,
    /// Direction of the deformed corner-to-center vector.
    pub axis: Vec3,
    /// ‖c' − v'‖ / ‖c − v‖.
    pub scale: f64,
    /// Linear map taking the corner's rest frame to its deformed frame.
    pub linear: Mat3,
}

fn same_layer_neighbors(k: usize) -> (usize, usize) {
    let base = if k < 3 { 0 } else { 3 };
    let i = k - base;
    (base + (i + 1) % 3, base + (i + 2) % 3)
}

/// Frame at corner `k`: its two layer edges plus the corner-to-center vector,
/// or the scaled face normal when that vector is nearly in the layer plane.
fn corner_frame(cell: &PrismaticCell, k: usize, use_center: bool) -> Mat3 {
    let p = cell.corner(k);
    let (a, b) = same_layer_neighbors(k);
    let e1 = cell.corner(a) - p;
    let e2 = cell.corner(b) - p;
    let third = if use_center {
        cell.centroid() - p
    } else {
        let n = e1.cross(&e2);
        let len = n.norm();
        if len > 0.0 {
            n / len.sqrt()
        } else {
            n
        }
    };
    Matrix3::from_columns(&[e1, e2, third])
}

fn frame_is_well_conditioned(cell: &PrismaticCell, k: usize) -> bool {
    let m = corner_frame(cell, k, true);
    let norms: f64 = (0..3).map(|c| m.column(c).norm()).product();
    norms > 0.0 && (m.determinant() / norms).abs() >= 0.05
}

fn polar_rotation(m: &Mat3) -> Mat3 {
    let svd = m.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut r = u * v_t;
    if r.determinant() < 0.0 {
        let mut u = u;
        let mut col = u.column_mut(2);
        col *= -1.0;
        r = u * v_t;
    }
    r
}

pub fn vertex_local_transform(before: &PrismaticCell, after: &PrismaticCell, k: usize) -> Result<CornerTransform> {
    let u = before.centroid() - before.corner(k);
    let u_new = after.centroid() - after.corner(k);
    let (len, len_new) = (u.norm(), u_new.norm());
    if len <= 1e-12 || len_new <= 1e-12 {
        return Err(Error::DegenerateCellCenter(k));
    }
    let use_center = frame_is_well_conditioned(before, k) && frame_is_well_conditioned(after, k);
    let rest = corner_frame(before, k, use_center);
    let deformed = corner_frame(after, k, use_center);
    let inv = rest.try_inverse().ok_or(Error::DegenerateCellCenter(k))?;
    let linear = deformed * inv;
    Ok(CornerTransform {
        rotation: quat_from_rotation(&polar_rotation(&linear)),
        axis: u_new / len_new,
        scale: len_new / len,
        linear,
    })
}

/// Strict transfer: fails with [`Error::DegenerateAxes`] instead of falling back.
pub fn try_transfer_deformation(
    g: &FrostedGaussian,
    before: &PrismaticCell,
    after: &PrismaticCell,
) -> Result<FrostedGaussian> {
    if before.corners() == after.corners() {
        return Ok(g.clone());
    }
    let w = g.barycentrics();
    let mut avg = Mat3::zeros();
    for k in 0..6 {
        avg += vertex_local_transform(before, after, k)?.linear * w[k];
    }
    let r_old = g.rotation_matrix()?;
    let scales = g.log_scales.map(f64::exp);
    let axes: [Vec3; 3] = std::array::from_fn(|j| avg * (r_old.column(j) * scales[j]));
    let lengths: [f64; 3] = axes.map(|a| a.norm());
    let longest = lengths.iter().copied().fold(0.0, f64::max);
    if !(longest > 0.0) || lengths.iter().any(|l| !l.is_finite()) {
        return Err(Error::DegenerateAxes);
    }

    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| lengths[b].total_cmp(&lengths[a]).then(a.cmp(&b)));
    let mut dirs = [Vec3::zeros(); 3];
    let first = axes[order[0]] / lengths[order[0]];
    let mut second = axes[order[1]] - first * first.dot(&axes[order[1]]);
    let second_len = second.norm();
    if second_len <= 1e-9 * longest {
        return Err(Error::DegenerateAxes);
    }
    second /= second_len;
    let mut third = first.cross(&second);
    if third.dot(&axes[order[2]]) < 0.0 {
        third = -third;
    }
    dirs[order[0]] = first;
    dirs[order[1]] = second;
    dirs[order[2]] = third;
    let mut r_new = Matrix3::from_columns(&dirs);
    if r_new.determinant() < 0.0 {
        let mut col = r_new.column_mut(order[2]);
        col *= -1.0;
    }
    if lengths.iter().any(|&l| l <= 0.0) {
        return Err(Error::DegenerateAxes);
    }

    let net = quat_from_rotation(&(r_new * r_old.transpose()));
    let residual = net * g.residual_rotation;
    Ok(FrostedGaussian {
        log_scales: Vec3::new(lengths[0].ln(), lengths[1].ln(), lengths[2].ln()),
        rotation: quat_from_rotation(&r_new),
        residual_rotation: residual / residual.norm(),
        ..g.clone()
    })
}

/// Moves a Gaussian's shape along with its cell. On rank-deficient axes the
/// previous rotation is kept and scales are multiplied by the mean corner scale.
pub fn transfer_deformation(g: &FrostedGaussian, before: &PrismaticCell, after: &PrismaticCell) -> Result<FrostedGaussian> {
    match try_transfer_deformation(g, before, after) {
        Err(Error::DegenerateAxes) => {
            let mut mean_scale = 0.0;
            for k in 0..6 {
                mean_scale += vertex_local_transform(before, after, k)?.scale / 6.0;
            }
            Ok(FrostedGaussian {
                log_scales: g.log_scales.add_scalar(mean_scale.ln()),
                ..g.clone()
            })
        }
        other => other,
    }
}

/// SH color evaluated at the view direction pulled back through the residual rotation.
pub fn adjusted_sh_eval(g: &FrostedGaussian, degree: usize, view_dir: &Vec3) -> Result<[f64; 3]> {
    sh::radiance(degree, &g.sh, &pull_back(g, view_dir))
}

pub(crate) fn pull_back(g: &FrostedGaussian, view_dir: &Vec3) -> Vec3 {
    if g.residual_rotation == math::identity_quat() {
        return *view_dir;
    }
    match math::rotation_matrix(&g.residual_rotation) {
        Some(r) => r.transpose() * view_dir,
        None => *view_dir,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Rotation3, Unit};

    fn gaussian(logits: [f64; 6]) -> FrostedGaussian {
        FrostedGaussian {
            cell: 0,
            bary_logits: logits,
            log_scales: Vec3::new(-1.0, -1.5, -2.0),
            rotation: Quat::new(0.9, 0.1, -0.3, 0.2),
            opacity_logit: 0.0,
            sh: vec![0.0; 12],
            residual_rotation: math::identity_quat(),
        }
    }

    fn cell() -> PrismaticCell {
        let inner = [Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.1), Vec3::new(0.0, 1.0, -0.1)];
        let outer = [Vec3::new(0.0, 0.1, 0.5), Vec3::new(1.1, 0.0, 0.6), Vec3::new(0.0, 1.0, 0.4)];
        PrismaticCell::new(0, outer, inner)
    }

    fn map_cell(c: &PrismaticCell, f: impl Fn(&Vec3) -> Vec3) -> PrismaticCell {
        PrismaticCell::new(c.face, c.outer.map(|p| f(&p)), c.inner.map(|p| f(&p)))
    }

    #[test]
    fn barycentric_examples() {
        let w = gaussian([0.7; 6]).barycentrics();
        assert!(w.iter().all(|&x| (x - 1.0 / 6.0).abs() < 1e-15));
        let w = gaussian([50.0, 0.0, 0.0, 0.0, 0.0, 0.0]).barycentrics();
        assert!(w[0] > 1.0 - 1e-12);
        let a = gaussian([0.1, 0.2, -0.3, 1.0, 2.0, -1.0]).barycentrics();
        let b = gaussian([5.1, 5.2, 4.7, 6.0, 7.0, 4.0]).barycentrics();
        for k in 0..6 {
            assert!((a[k] - b[k]).abs() < 1e-12);
        }
        assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn position_examples() {
        let c = cell();
        let one_hot = position_in_cell(&c, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(one_hot, c.outer[0]);
        let uniform = position_in_cell(&c, &[1.0 / 6.0; 6]);
        assert!((uniform - c.centroid()).norm() < 1e-12);
    }

    #[test]
    fn identity_transform() {
        let c = cell();
        for k in 0..6 {
            let t = vertex_local_transform(&c, &c, k).unwrap();
            assert!((t.linear - Mat3::identity()).norm() < 1e-12);
            assert!((t.scale - 1.0).abs() < 1e-15);
            assert!((t.rotation.w - 1.0).abs() < 1e-12);
        }
        let g = gaussian([0.3, -0.2, 0.5, 0.1, 0.0, -0.4]);
        assert_eq!(transfer_deformation(&g, &c, &c).unwrap(), g);
    }

    #[test]
    fn rotation_about_z_is_recovered_at_every_corner() {
        let c = cell();
        let rot = Rotation3::from_axis_angle(&Vec3::z_axis(), std::f64::consts::FRAC_PI_2);
        let after = map_cell(&c, |p| rot * p);
        for k in 0..6 {
            let t = vertex_local_transform(&c, &after, k).unwrap();
            assert!((t.linear - rot.matrix()).norm() < 1e-12);
            assert!((t.scale - 1.0).abs() < 1e-12);
            let r = math::rotation_matrix(&t.rotation).unwrap();
            assert!((r - rot.matrix()).norm() < 1e-12);
        }
    }

    #[test]
    fn dilation_about_center() {
        let c = cell();
        let center = c.centroid();
        let after = map_cell(&c, |p| center + (p - center) * 2.0);
        for k in 0..6 {
            let t = vertex_local_transform(&c, &after, k).unwrap();
            assert!((t.scale - 2.0).abs() < 1e-12);
            assert!((t.rotation.w - 1.0).abs() < 1e-12);
        }
        let g = gaussian([0.3, -0.2, 0.5, 0.1, 0.0, -0.4]);
        let moved = transfer_deformation(&g, &c, &after).unwrap();
        for j in 0..3 {
            assert!((moved.log_scales[j] - g.log_scales[j] - 2f64.ln()).abs() < 1e-6);
        }
        let r0 = g.rotation_matrix().unwrap();
        let r1 = moved.rotation_matrix().unwrap();
        assert!((r0 - r1).norm() < 1e-9);
    }

    #[test]
    fn rigid_rotation_rotates_covariance_and_residual() {
        let c = cell();
        let rot = Rotation3::from_axis_angle(&Unit::new_normalize(Vec3::new(0.3, -1.0, 0.4)), 1.1);
        let t = Vec3::new(3.0, -1.0, 2.0);
        let after = map_cell(&c, |p| rot * p + t);
        let g = gaussian([0.3, -0.2, 0.5, 0.1, 0.0, -0.4]);
        let moved = transfer_deformation(&g, &c, &after).unwrap();
        let expected = rot.matrix() * g.covariance().unwrap() * rot.matrix().transpose();
        let got = moved.covariance().unwrap();
        assert!((got - expected).norm() / expected.norm() < 1e-9);
        assert!((moved.log_scales - g.log_scales).norm() < 1e-9);
        let residual = math::rotation_matrix(&moved.residual_rotation).unwrap();
        assert!((residual - rot.matrix()).norm() < 1e-9);
        assert_eq!(moved.bary_logits, g.bary_logits);
    }

    #[test]
    fn adjusted_sh_matches_rotated_degree_one_coefficients() {
        let mut g = gaussian([0.0; 6]);
        g.sh = vec![0.2, -0.1, 0.3, 0.5, -0.2, 0.1, 0.05, 0.4, -0.3, -0.25, 0.15, 0.2];
        let d = Vec3::new(0.2, -0.5, 0.7).normalize();
        assert_eq!(adjusted_sh_eval(&g, 1, &d).unwrap(), sh::radiance(1, &g.sh, &d).unwrap());

        let rot = Rotation3::from_axis_angle(&Unit::new_normalize(Vec3::new(1.0, 2.0, -0.5)), 0.8);
        g.residual_rotation = quat_from_rotation(rot.matrix());
        // Degree-1 part is C1 · v·d with v = (−a3, −a1, a2); rotating v by R is the oracle.
        let mut rotated = g.sh.clone();
        for c in 0..3 {
            let v = Vec3::new(-g.sh[9 + c], -g.sh[3 + c], g.sh[6 + c]);
            let rv = rot * v;
            rotated[3 + c] = -rv.y;
            rotated[6 + c] = rv.z;
            rotated[9 + c] = -rv.x;
        }
        let got = adjusted_sh_eval(&g, 1, &d).unwrap();
        let want = sh::radiance(1, &rotated, &d).unwrap();
        for c in 0..3 {
            assert!((got[c] - want[c]).abs() < 1e-9);
        }
        // DC-only colors ignore the residual.
        let mut dc = g.clone();
        dc.sh.truncate(3);
        assert_eq!(
            adjusted_sh_eval(&dc, 0, &d).unwrap(),
            sh::radiance(0, &dc.sh, &d).unwrap()
        );
    }

    #[test]
    fn bad_cell_index() {
        let layer = FrostingLayer {
            delta_in: vec![],
            delta_out: vec![],
            cells: vec![cell()],
            total_volume: 0.0,
        };
        let mut g = gaussian([0.0; 6]);
        g.cell = 3;
        assert!(matches!(position(&g, &layer), Err(Error::BadCellIndex { index: 3, count: 1 })));
    }
}
