//! Prismatic cells spanned by the inner and outer offset of each face, their
//! (optionally contracted) volumes, and point containment.
//!
//! Corner numbering follows the barycentric parameterization: corners 0..3 are
//! the outer offsets of the face's vertices, corners 3..6 the inner offsets.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::Vec3;
use crate::scene::TriMesh;
use crate::thickness::VertexShiftRecord;

/// Tetrahedra (as indices into [i0, i1, i2, o0, o1, o2]) covering a prism.
const TETRAHEDRA: [[usize; 4]; 3] = [[0, 1, 2, 5], [0, 1, 4, 5], [0, 3, 4, 5]];
const BARY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct PrismaticCell {
    pub face: usize,
    pub outer: [Vec3; 3],
    pub inner: [Vec3; 3],
    pub volume: f64,
}

impl PrismaticCell {
    pub fn new(face: usize, outer: [Vec3; 3], inner: [Vec3; 3]) -> Self {
        let volume = cell_volume(&corners_inner_first(&outer, &inner));
        Self {
            face,
            outer,
            inner,
            volume,
        }
    }

    /// Corner `k` in barycentric order (outer 0..3, inner 3..6).
    pub fn corner(&self, k: usize) -> Vec3 {
        if k < 3 {
            self.outer[k]
        } else {
            self.inner[k - 3]
        }
    }

    pub fn corners(&self) -> [Vec3; 6] {
        std::array::from_fn(|k| self.corner(k))
    }

    pub fn centroid(&self) -> Vec3 {
        self.corners().iter().sum::<Vec3>() / 6.0
    }

    pub fn bounds(&self) -> (Vec3, Vec3) {
        let c = self.corners();
        c.iter()
            .skip(1)
            .fold((c[0], c[0]), |(lo, hi), p| (lo.inf(p), hi.sup(p)))
    }

    pub fn diameter(&self) -> f64 {
        let (lo, hi) = self.bounds();
        (hi - lo).norm()
    }

    pub fn contains(&self, p: &Vec3) -> Result<bool> {
        point_in_cell(p, self)
    }
}

fn corners_inner_first(outer: &[Vec3; 3], inner: &[Vec3; 3]) -> [Vec3; 6] {
    [inner[0], inner[1], inner[2], outer[0], outer[1], outer[2]]
}

fn tetra_signed_volume(a: &Vec3, b: &Vec3, c: &Vec3, d: &Vec3) -> f64 {
    (b - a).dot(&(c - a).cross(&(d - a))) / 6.0
}

/// Volume of the prism given as [i0, i1, i2, o0, o1, o2], summed over a fixed
/// three-tetrahedron split with the absolute value of each piece.
pub fn cell_volume(corners: &[Vec3; 6]) -> f64 {
    TETRAHEDRA
        .iter()
        .map(|t| {
            tetra_signed_volume(&corners[t[0]], &corners[t[1]], &corners[t[2]], &corners[t[3]]).abs()
        })
        .sum()
}

/// Barycentric containment test against the tetrahedra of the cell.
pub fn point_in_cell(p: &Vec3, cell: &PrismaticCell) -> Result<bool> {
    let diam = cell.diameter();
    if !(cell.volume > 1e-12 * diam * diam * diam) {
        return Err(Error::DegenerateCell(cell.face));
    }
    let c = corners_inner_first(&cell.outer, &cell.inner);
    for t in TETRAHEDRA {
        let (a, b, cc, d) = (c[t[0]], c[t[1]], c[t[2]], c[t[3]]);
        let vol = tetra_signed_volume(&a, &b, &cc, &d);
        if vol.abs() <= 1e-14 * diam * diam * diam {
            continue;
        }
        let w = [
            tetra_signed_volume(p, &b, &cc, &d) / vol,
            tetra_signed_volume(&a, p, &cc, &d) / vol,
            tetra_signed_volume(&a, &b, p, &d) / vol,
            tetra_signed_volume(&a, &b, &cc, p) / vol,
        ];
        if w.iter().all(|&x| x >= -BARY_TOLERANCE) {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Per-vertex shifts and the cells they induce.
#[derive(Debug, Clone, PartialEq)]
pub struct FrostingLayer {
    pub delta_in: Vec<f64>,
    pub delta_out: Vec<f64>,
    pub cells: Vec<PrismaticCell>,
    pub total_volume: f64,
}

impl FrostingLayer {
    pub fn from_deltas(mesh: &TriMesh, delta_in: Vec<f64>, delta_out: Vec<f64>) -> Result<Self> {
        let n = mesh.vertices.len();
        if delta_in.len() != n || delta_out.len() != n {
            return Err(Error::ShiftLengthMismatch {
                shifts: delta_in.len().min(delta_out.len()),
                vertices: n,
            });
        }
        let cells: Vec<PrismaticCell> = (0..mesh.faces.len())
            .into_par_iter()
            .map(|f| {
                let face = mesh.faces[f].map(|i| i as usize);
                let outer = face.map(|i| mesh.vertices[i] + delta_out[i] * mesh.normals[i]);
                let inner = face.map(|i| mesh.vertices[i] + delta_in[i] * mesh.normals[i]);
                PrismaticCell::new(f, outer, inner)
            })
            .collect();
        let total_volume = cells.iter().map(|c| c.volume).sum();
        Ok(Self {
            delta_in,
            delta_out,
            cells,
            total_volume,
        })
    }

    pub fn cell(&self, index: usize) -> Result<&PrismaticCell> {
        self.cells.get(index).ok_or(Error::BadCellIndex {
            index,
            count: self.cells.len(),
        })
    }
}

/// Builds the layer from per-vertex shift records.
pub fn build_cells(mesh: &TriMesh, shifts: &[VertexShiftRecord]) -> Result<FrostingLayer> {
    if shifts.len() != mesh.vertices.len() {
        return Err(Error::ShiftLengthMismatch {
            shifts: shifts.len(),
            vertices: mesh.vertices.len(),
        });
    }
    FrostingLayer::from_deltas(
        mesh,
        shifts.iter().map(|s| s.delta_in).collect(),
        shifts.iter().map(|s| s.delta_out).collect(),
    )
}

/// Center and radius of the contraction map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContractionParams {
    pub center: [f64; 3],
    pub radius: f64,
}

impl ContractionParams {
    pub fn new(center: Vec3, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::NonPositiveInput(format!("contraction radius {radius}")));
        }
        Ok(Self {
            center: [center.x, center.y, center.z],
            radius,
        })
    }

    /// Center of the bounding box of `positions`, radius half its diagonal.
    pub fn from_positions(positions: &[Vec3]) -> Result<Self> {
        let first = positions.first().ok_or(Error::EmptyDataset)?;
        let (lo, hi) = positions
            .iter()
            .fold((*first, *first), |(lo, hi), p| (lo.inf(p), hi.sup(p)));
        Self::new((lo + hi) / 2.0, (hi - lo).norm() / 2.0)
    }

    /// Fallback without cameras: mesh vertex centroid, half the mesh bounding-box diagonal.
    pub fn from_mesh(mesh: &TriMesh) -> Result<Self> {
        let (lo, hi) = mesh
            .bounds()
            .ok_or_else(|| Error::InvalidMesh("mesh has no vertices".into()))?;
        let centroid = mesh.vertices.iter().sum::<Vec3>() / mesh.vertices.len() as f64;
        Self::new(centroid, (hi - lo).norm() / 2.0)
    }

    pub fn center(&self) -> Vec3 {
        Vec3::from(self.center)
    }
}

/// Identity inside radius l around c, c + l (2 − l/‖x−c‖)(x−c)/‖x−c‖ outside.
pub fn contract_point(x: &Vec3, params: &ContractionParams) -> Vec3 {
    let c = params.center();
    let l = params.radius;
    let d = x - c;
    let r = d.norm();
    if r <= l {
        *x
    } else {
        c + (l * (2.0 - l / r) / r) * d
    }
}

pub fn contracted_volume(cell: &PrismaticCell, params: &ContractionParams) -> f64 {
    let outer = cell.outer.map(|p| contract_point(&p, params));
    let inner = cell.inner.map(|p| contract_point(&p, params));
    cell_volume(&corners_inner_first(&outer, &inner))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn right_prism(h: f64) -> PrismaticCell {
        let base = [Vec3::zeros(), Vec3::x(), Vec3::y()];
        PrismaticCell::new(0, base.map(|p| p + Vec3::z() * h), base)
    }

    fn single_triangle() -> TriMesh {
        TriMesh::new(vec![Vec3::zeros(), Vec3::x(), Vec3::y()], vec![[0, 1, 2]]).unwrap()
    }

    #[test]
    fn right_prism_volume() {
        let mesh = single_triangle();
        let layer = FrostingLayer::from_deltas(&mesh, vec![0.0; 3], vec![1.0; 3]).unwrap();
        assert_eq!(layer.cells.len(), 1);
        assert!((layer.total_volume - 0.5).abs() < 1e-12);
        assert!((right_prism(2.5).volume - 1.25).abs() < 1e-12);
    }

    #[test]
    fn zero_thickness_has_zero_volume() {
        let mesh = single_triangle();
        let layer = FrostingLayer::from_deltas(&mesh, vec![0.3; 3], vec![0.3; 3]).unwrap();
        assert_eq!(layer.total_volume, 0.0);
        assert!(matches!(point_in_cell(&Vec3::zeros(), &layer.cells[0]), Err(Error::DegenerateCell(0))));
    }

    #[test]
    fn shift_length_mismatch() {
        let mesh = single_triangle();
        assert!(matches!(
            FrostingLayer::from_deltas(&mesh, vec![0.0; 2], vec![1.0; 2]),
            Err(Error::ShiftLengthMismatch { shifts: 2, vertices: 3 })
        ));
    }

    #[test]
    fn centroid_inside_far_point_outside() {
        let cell = right_prism(1.0);
        assert!(point_in_cell(&cell.centroid(), &cell).unwrap());
        assert!(!point_in_cell(&(cell.centroid() + Vec3::x() * 10.0 * cell.diameter()), &cell).unwrap());
    }

    /// Convex-hull membership through the prism's five bounding planes.
    fn inside_half_spaces(p: &Vec3, cell: &PrismaticCell) -> bool {
        let c = cell.centroid();
        let o = cell.outer;
        let i = cell.inner;
        let planes = [
            (o[0], (o[1] - o[0]).cross(&(o[2] - o[0]))),
            (i[0], (i[1] - i[0]).cross(&(i[2] - i[0]))),
            (i[0], (i[1] - i[0]).cross(&(o[0] - i[0]))),
            (i[1], (i[2] - i[1]).cross(&(o[1] - i[1]))),
            (i[2], (i[0] - i[2]).cross(&(o[2] - i[2]))),
        ];
        planes.iter().all(|(q, n)| {
            let side_c = (c - q).dot(n);
            let side_p = (p - q).dot(n);
            side_p * side_c.signum() >= 0.0
        })
    }

    #[test]
    fn containment_agrees_with_half_spaces_on_a_convex_cell() {
        // A frustum-like prism: outer triangle is a scaled copy of the inner one.
        let inner = [Vec3::zeros(), Vec3::new(2.0, 0.0, 0.0), Vec3::new(0.0, 2.0, 0.0)];
        let outer = inner.map(|p| (p - Vec3::new(0.66, 0.66, 0.0)) * 0.5 + Vec3::new(0.66, 0.66, 1.0));
        let cell = PrismaticCell::new(0, outer, inner);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10_000 {
            let p = Vec3::new(rng.gen_range(-0.5..2.5), rng.gen_range(-0.5..2.5), rng.gen_range(-0.5..1.5));
            assert_eq!(point_in_cell(&p, &cell).unwrap(), inside_half_spaces(&p, &cell), "{p:?}");
        }
    }

    #[test]
    fn contraction_examples() {
        let params = ContractionParams::new(Vec3::new(1.0, -2.0, 0.5), 2.0).unwrap();
        let c = params.center();
        let dir = Vec3::new(0.6, 0.0, 0.8);
        let inside = c + dir * 1.0;
        assert_eq!(contract_point(&inside, &params), inside);
        let at2 = contract_point(&(c + dir * 4.0), &params);
        assert!(((at2 - c).norm() - 3.0).abs() < 1e-12);
        let far = contract_point(&(c + dir * 2e6), &params);
        assert!((far - c).norm() < 4.0);
        assert!((far - c).norm() > 4.0 - 1e-5);
        assert_eq!(contract_point(&c, &params), c);
    }

    #[test]
    fn contracted_volume_inside_and_far() {
        let cell = right_prism(0.5);
        let params = ContractionParams::new(Vec3::zeros(), 10.0).unwrap();
        assert_eq!(contracted_volume(&cell, &params), cell.volume);
        let small = ContractionParams::new(Vec3::zeros(), 0.01).unwrap();
        let offset = Vec3::new(1.0, 0.0, 0.0);
        let far = PrismaticCell::new(0, cell.outer.map(|p| p + offset), cell.inner.map(|p| p + offset));
        assert!(contracted_volume(&far, &small) < 1e-3 * far.volume);
    }
}
