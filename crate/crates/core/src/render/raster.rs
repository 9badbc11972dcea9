//! Projection of 3D Gaussians to screen-space splats and front-to-back
//! compositing, tiled and brute-force, plus the compositing backward pass.

use rayon::prelude::*;

use super::{Camera, Image};
use crate::math::{Mat3, Vec3};

pub const TILE_SIZE: u32 = 16;
pub const ALPHA_MIN: f64 = 1.0 / 255.0;
pub const ALPHA_MAX: f64 = 0.99;
pub const TRANSMITTANCE_MIN: f64 = 1e-4;
/// Screen-space dilation added to the projected covariance diagonal (px²).
pub const DILATION: f64 = 0.3;
/// Extra pixels added around each splat's footprint when binning.
const BIN_MARGIN: f64 = 1.0;

/// A world-space Gaussian ready for projection: color is already view-resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedGaussian {
    pub mean: Vec3,
    pub cov: Mat3,
    pub opacity: f64,
    pub color: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub mean2d: [f64; 2],
    /// (xx, xy, yy) including the dilation.
    pub cov2d: [f64; 3],
    pub depth: f64,
}

/// Perspective projection with the first-order (EWA) covariance; `None` at or
/// behind the near plane.
pub fn project_gaussian(g: &PreparedGaussian, cam: &Camera) -> Option<Projection> {
    let t = cam.to_camera(&g.mean);
    if t.z <= cam.near {
        return None;
    }
    let j = jacobian(cam, &t);
    let m = j * cam.rotation;
    let c = m * g.cov * m.transpose();
    Some(Projection {
        mean2d: [cam.fx * t.x / t.z + cam.cx, cam.fy * t.y / t.z + cam.cy],
        cov2d: [c[(0, 0)] + DILATION, c[(0, 1)], c[(1, 1)] + DILATION],
        depth: t.z,
    })
}

pub(crate) fn jacobian(cam: &Camera, t: &Vec3) -> nalgebra::Matrix2x3<f64> {
    let iz = 1.0 / t.z;
    nalgebra::Matrix2x3::new(
        cam.fx * iz,
        0.0,
        -cam.fx * t.x * iz * iz,
        0.0,
        cam.fy * iz,
        -cam.fy * t.y * iz * iz,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct Splat {
    /// Index of the source Gaussian.
    pub source: usize,
    pub mean: [f64; 2],
    pub conic: [f64; 3],
    pub depth: f64,
    pub opacity: f64,
    pub color: [f64; 3],
    /// Inclusive pixel bounds [x0, y0, x1, y1] of the footprint, clipped to the image.
    pub bounds: [u32; 4],
}

/// Projects, culls and depth-sorts (stable on source index).
pub fn make_splats(gaussians: &[PreparedGaussian], cam: &Camera) -> Vec<Splat> {
    let mut splats: Vec<Splat> = gaussians
        .par_iter()
        .enumerate()
        .filter_map(|(i, g)| to_splat(i, g, cam))
        .collect();
    splats.sort_by(|a, b| a.depth.total_cmp(&b.depth).then(a.source.cmp(&b.source)));
    splats
}

fn to_splat(source: usize, g: &PreparedGaussian, cam: &Camera) -> Option<Splat> {
    if !(g.opacity >= ALPHA_MIN) {
        return None;
    }
    let p = project_gaussian(g, cam)?;
    let [a, b, c] = p.cov2d;
    let det = a * c - b * b;
    if !(det > 0.0) {
        return None;
    }
    let conic = [c / det, -b / det, a / det];
    // Outside q > 2 ln(255 α) the splat's alpha drops below ALPHA_MIN.
    let q_max = 2.0 * (g.opacity / ALPHA_MIN).ln();
    let hx = (q_max * a).sqrt() + BIN_MARGIN;
    let hy = (q_max * c).sqrt() + BIN_MARGIN;
    // Pixel (x, y) has its center at (x + 0.5, y + 0.5).
    let x0 = (p.mean2d[0] - hx - 0.5).floor();
    let x1 = (p.mean2d[0] + hx - 0.5).ceil();
    let y0 = (p.mean2d[1] - hy - 0.5).floor();
    let y1 = (p.mean2d[1] + hy - 0.5).ceil();
    let (w, h) = (cam.width as f64, cam.height as f64);
    if !(x1 >= 0.0 && y1 >= 0.0 && x0 < w && y0 < h) {
        return None;
    }
    Some(Splat {
        source,
        mean: p.mean2d,
        conic,
        depth: p.depth,
        opacity: g.opacity,
        color: g.color,
        bounds: [
            x0.max(0.0) as u32,
            y0.max(0.0) as u32,
            x1.min(w - 1.0) as u32,
            y1.min(h - 1.0) as u32,
        ],
    })
}

/// Alpha of a splat at a pixel center, `None` when it is skipped.
#[inline]
pub(crate) fn splat_alpha(s: &Splat, px: f64, py: f64) -> Option<(f64, f64, f64, f64)> {
    let dx = px - s.mean[0];
    let dy = py - s.mean[1];
    let power = -0.5 * (s.conic[0] * dx * dx + 2.0 * s.conic[1] * dx * dy + s.conic[2] * dy * dy);
    if power > 0.0 {
        return None;
    }
    let g = power.exp();
    let a = (s.opacity * g).min(ALPHA_MAX);
    if a < ALPHA_MIN {
        return None;
    }
    Some((a, g, dx, dy))
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PixelResult {
    /// Composited color before clamping to [0, 1].
    pub raw: [f64; 3],
    pub transmittance: f64,
    /// Number of list entries visited (index of the last blended entry + 1).
    pub visited: u32,
    /// Σ a_k T_k over blended splats.
    pub alpha: f64,
}

/// Front-to-back compositing of `order` (indices into `splats`) at one pixel.
#[inline]
pub(crate) fn composite_pixel<I: Iterator<Item = usize>>(
    splats: &[Splat],
    order: I,
    px: f64,
    py: f64,
    background: &[f64; 3],
) -> PixelResult {
    let mut t = 1.0;
    let mut rgb = [0.0; 3];
    let mut alpha = 0.0;
    let mut visited = 0;
    for (n, i) in order.enumerate() {
        let s = &splats[i];
        let Some((a, _, _, _)) = splat_alpha(s, px, py) else {
            continue;
        };
        let next_t = t * (1.0 - a);
        if next_t < TRANSMITTANCE_MIN {
            break;
        }
        for c in 0..3 {
            rgb[c] += s.color[c] * a * t;
        }
        alpha += a * t;
        t = next_t;
        visited = n as u32 + 1;
    }
    for c in 0..3 {
        rgb[c] += t * background[c];
    }
    PixelResult {
        raw: rgb,
        transmittance: t,
        visited,
        alpha,
    }
}

/// Per-frame rasterization state kept for the backward pass.
#[derive(Debug, Clone)]
pub struct RasterOutput {
    pub image: Image,
    pub splats: Vec<Splat>,
    pub tiles_x: u32,
    pub tiles_y: u32,
    /// Per tile, indices into `splats` in depth order.
    pub tile_lists: Vec<Vec<u32>>,
    pub pixels: Vec<PixelResult>,
}

fn clamp01(rgb: [f64; 3]) -> [f64; 3] {
    rgb.map(|v| v.clamp(0.0, 1.0))
}

/// Tile-based rasterizer: 16×16 tiles rendered in parallel.
pub fn rasterize(splats: Vec<Splat>, cam: &Camera, background: [f64; 3]) -> RasterOutput {
    let tiles_x = cam.width.div_ceil(TILE_SIZE);
    let tiles_y = cam.height.div_ceil(TILE_SIZE);
    let mut tile_lists: Vec<Vec<u32>> = vec![Vec::new(); (tiles_x * tiles_y) as usize];
    for (i, s) in splats.iter().enumerate() {
        let [x0, y0, x1, y1] = s.bounds;
        for ty in y0 / TILE_SIZE..=y1 / TILE_SIZE {
            for tx in x0 / TILE_SIZE..=x1 / TILE_SIZE {
                tile_lists[(ty * tiles_x + tx) as usize].push(i as u32);
            }
        }
    }

    let width = cam.width as usize;
    let tile_pixels: Vec<Vec<(usize, PixelResult)>> = (0..tile_lists.len())
        .into_par_iter()
        .map(|tile| {
            let tx = tile as u32 % tiles_x;
            let ty = tile as u32 / tiles_x;
            let list = &tile_lists[tile];
            let mut out = Vec::with_capacity((TILE_SIZE * TILE_SIZE) as usize);
            for y in ty * TILE_SIZE..((ty + 1) * TILE_SIZE).min(cam.height) {
                for x in tx * TILE_SIZE..((tx + 1) * TILE_SIZE).min(cam.width) {
                    let r = composite_pixel(
                        &splats,
                        list.iter().map(|&i| i as usize),
                        x as f64 + 0.5,
                        y as f64 + 0.5,
                        &background,
                    );
                    out.push((y as usize * width + x as usize, r));
                }
            }
            out
        })
        .collect();

    let mut pixels = vec![PixelResult::default(); width * cam.height as usize];
    let mut image = Image::new(cam.width, cam.height);
    for (idx, r) in tile_pixels.into_iter().flatten() {
        pixels[idx] = r;
        image.data[3 * idx..3 * idx + 3].copy_from_slice(&clamp01(r.raw));
    }
    RasterOutput {
        image,
        splats,
        tiles_x,
        tiles_y,
        tile_lists,
        pixels,
    }
}

/// Reference compositor: every splat is evaluated at every pixel in global depth order.
pub fn rasterize_brute(splats: &[Splat], cam: &Camera, background: [f64; 3]) -> Image {
    let width = cam.width as usize;
    let rows: Vec<Vec<f64>> = (0..cam.height)
        .into_par_iter()
        .map(|y| {
            let mut row = Vec::with_capacity(width * 3);
            for x in 0..cam.width {
                let r = composite_pixel(splats, 0..splats.len(), x as f64 + 0.5, y as f64 + 0.5, &background);
                row.extend_from_slice(&clamp01(r.raw));
            }
            row
        })
        .collect();
    Image {
        width: cam.width,
        height: cam.height,
        data: rows.concat(),
    }
}

/// Gradient of the loss with respect to one splat's screen-space quantities.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SplatGrad {
    pub mean: [f64; 2],
    pub conic: [f64; 3],
    pub opacity: f64,
    pub color: [f64; 3],
}

impl SplatGrad {
    fn add(&mut self, o: &SplatGrad) {
        for k in 0..2 {
            self.mean[k] += o.mean[k];
        }
        for k in 0..3 {
            self.conic[k] += o.conic[k];
            self.color[k] += o.color[k];
        }
        self.opacity += o.opacity;
    }
}

/// Back-propagates dL/d(image) through the compositing. Tiles accumulate into
/// private buffers that are reduced in tile order, so the result does not
/// depend on scheduling.
pub fn rasterize_backward(out: &RasterOutput, cam: &Camera, background: [f64; 3], grad_image: &[f64]) -> Vec<SplatGrad> {
    let width = cam.width as usize;
    let per_tile: Vec<Vec<SplatGrad>> = (0..out.tile_lists.len())
        .into_par_iter()
        .map(|tile| {
            let list = &out.tile_lists[tile];
            let mut grads = vec![SplatGrad::default(); list.len()];
            let tx = tile as u32 % out.tiles_x;
            let ty = tile as u32 / out.tiles_x;
            for y in ty * TILE_SIZE..((ty + 1) * TILE_SIZE).min(cam.height) {
                for x in tx * TILE_SIZE..((tx + 1) * TILE_SIZE).min(cam.width) {
                    let idx = y as usize * width + x as usize;
                    let px = &out.pixels[idx];
                    let mut dl_dc = [0.0; 3];
                    for c in 0..3 {
                        let raw = px.raw[c];
                        if (0.0..=1.0).contains(&raw) {
                            dl_dc[c] = grad_image[3 * idx + c];
                        }
                    }
                    if dl_dc == [0.0; 3] {
                        continue;
                    }
                    backward_pixel(
                        &out.splats,
                        list,
                        px,
                        x as f64 + 0.5,
                        y as f64 + 0.5,
                        &background,
                        &dl_dc,
                        &mut grads,
                    );
                }
            }
            grads
        })
        .collect();

    let mut total = vec![SplatGrad::default(); out.splats.len()];
    for (tile, grads) in per_tile.iter().enumerate() {
        for (slot, g) in out.tile_lists[tile].iter().zip(grads) {
            total[*slot as usize].add(g);
        }
    }
    total
}

#[allow(clippy::too_many_arguments)]
fn backward_pixel(
    splats: &[Splat],
    list: &[u32],
    px: &PixelResult,
    x: f64,
    y: f64,
    background: &[f64; 3],
    dl_dc: &[f64; 3],
    grads: &mut [SplatGrad],
) {
    // `behind` is the normalized color seen behind the current splat.
    let mut behind = *background;
    let mut t = px.transmittance;
    for n in (0..px.visited as usize).rev() {
        let s = &splats[list[n] as usize];
        let Some((a, g, dx, dy)) = splat_alpha(s, x, y) else {
            continue;
        };
        t /= 1.0 - a;
        let grad = &mut grads[n];
        let mut dl_da = 0.0;
        for c in 0..3 {
            grad.color[c] += a * t * dl_dc[c];
            dl_da += (s.color[c] - behind[c]) * dl_dc[c];
        }
        dl_da *= t;
        for c in 0..3 {
            behind[c] = a * s.color[c] + (1.0 - a) * behind[c];
        }
        if s.opacity * g >= ALPHA_MAX {
            continue;
        }
        grad.opacity += g * dl_da;
        let dl_dpower = s.opacity * g * dl_da;
        grad.mean[0] += dl_dpower * (s.conic[0] * dx + s.conic[1] * dy);
        grad.mean[1] += dl_dpower * (s.conic[1] * dx + s.conic[2] * dy);
        grad.conic[0] += dl_dpower * (-0.5 * dx * dx);
        grad.conic[1] += dl_dpower * (-dx * dy);
        grad.conic[2] += dl_dpower * (-0.5 * dy * dy);
    }
}
