//! Flat parameter layout of a frosted Gaussian.

use crate::frosted::FrostedGaussian;

pub const LOGITS: usize = 0;
pub const SCALES: usize = 6;
pub const ROTATION: usize = 9;
pub const OPACITY: usize = 13;
pub const SH: usize = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Group {
    Logits,
    Scales,
    Rotation,
    Opacity,
    Sh,
}

impl Group {
    pub const ALL: [Group; 5] = [Group::Logits, Group::Scales, Group::Rotation, Group::Opacity, Group::Sh];

    pub fn name(self) -> &'static str {
        match self {
            Group::Logits => "bary_logits",
            Group::Scales => "log_scales",
            Group::Rotation => "rotation",
            Group::Opacity => "opacity",
            Group::Sh => "sh",
        }
    }

    pub fn of_offset(offset: usize) -> Group {
        match offset {
            o if o < SCALES => Group::Logits,
            o if o < ROTATION => Group::Scales,
            o if o < OPACITY => Group::Rotation,
            o if o < SH => Group::Opacity,
            _ => Group::Sh,
        }
    }
}

/// Parameters per Gaussian for a given SH coefficient count.
pub fn stride(sh_len: usize) -> usize {
    SH + sh_len
}

pub fn read(g: &FrostedGaussian, out: &mut [f64]) {
    out[LOGITS..SCALES].copy_from_slice(&g.bary_logits);
    out[SCALES..ROTATION].copy_from_slice(g.log_scales.as_slice());
    out[ROTATION..OPACITY].copy_from_slice(&[g.rotation.w, g.rotation.i, g.rotation.j, g.rotation.k]);
    out[OPACITY] = g.opacity_logit;
    out[SH..].copy_from_slice(&g.sh);
}

pub fn write(g: &mut FrostedGaussian, p: &[f64]) {
    g.bary_logits.copy_from_slice(&p[LOGITS..SCALES]);
    g.log_scales.copy_from_slice(&p[SCALES..ROTATION]);
    g.rotation = nalgebra::Quaternion::new(p[ROTATION], p[ROTATION + 1], p[ROTATION + 2], p[ROTATION + 3]);
    g.opacity_logit = p[OPACITY];
    g.sh.copy_from_slice(&p[SH..]);
}

pub fn flatten(gaussians: &[FrostedGaussian], sh_len: usize) -> Vec<f64> {
    let s = stride(sh_len);
    let mut out = vec![0.0; gaussians.len() * s];
    for (g, chunk) in gaussians.iter().zip(out.chunks_exact_mut(s)) {
        read(g, chunk);
    }
    out
}

pub fn unflatten(gaussians: &mut [FrostedGaussian], params: &[f64], sh_len: usize) {
    let s = stride(sh_len);
    for (g, chunk) in gaussians.iter_mut().zip(params.chunks_exact(s)) {
        write(g, chunk);
    }
}
