//! Image metrics and the training loss with its gradient.

use super::Image;

pub const PSNR_CAP: f64 = 100.0;
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;
/// Weight of the D-SSIM term in the loss.
pub const LAMBDA_DSSIM: f64 = 0.2;

fn check_shape(a: &Image, b: &Image) {
    assert!(a.same_shape(b), "image shapes differ: {}x{} vs {}x{}", a.width, a.height, b.width, b.height);
}

pub fn mse(a: &Image, b: &Image) -> f64 {
    check_shape(a, b);
    if a.data.is_empty() {
        return 0.0;
    }
    a.data.iter().zip(&b.data).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.data.len() as f64
}

/// 10 log10(1 / MSE), capped at 100 dB.
pub fn psnr(a: &Image, b: &Image) -> f64 {
    let m = mse(a, b);
    if m <= 0.0 {
        return PSNR_CAP;
    }
    (10.0 * (1.0 / m).log10()).min(PSNR_CAP)
}

fn gaussian_kernel() -> [f64; SSIM_WINDOW] {
    let r = (SSIM_WINDOW / 2) as f64;
    let mut k = [0.0; SSIM_WINDOW];
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - r;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = k.iter().sum();
    k.map(|v| v / s)
}

/// Single-channel planes with separable zero-padded filtering.
struct Filter {
    w: usize,
    h: usize,
    k: [f64; SSIM_WINDOW],
    /// Window mass inside the image at each pixel.
    norm: Vec<f64>,
}

impl Filter {
    fn new(w: usize, h: usize) -> Self {
        let mut f = Self {
            w,
            h,
            k: gaussian_kernel(),
            norm: Vec::new(),
        };
        f.norm = f.convolve(&vec![1.0; w * h]);
        f
    }

    fn convolve(&self, src: &[f64]) -> Vec<f64> {
        let (w, h) = (self.w, self.h);
        let r = (SSIM_WINDOW / 2) as isize;
        let mut tmp = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for (i, kv) in self.k.iter().enumerate() {
                    let xx = x as isize + i as isize - r;
                    if xx >= 0 && (xx as usize) < w {
                        acc += kv * src[y * w + xx as usize];
                    }
                }
                tmp[y * w + x] = acc;
            }
        }
        let mut out = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for (i, kv) in self.k.iter().enumerate() {
                    let yy = y as isize + i as isize - r;
                    if yy >= 0 && (yy as usize) < h {
                        acc += kv * tmp[yy as usize * w + x];
                    }
                }
                out[y * w + x] = acc;
            }
        }
        out
    }

    /// Window-normalized local mean.
    fn mean(&self, src: &[f64]) -> Vec<f64> {
        self.convolve(src).iter().zip(&self.norm).map(|(v, z)| v / z).collect()
    }

    /// Adjoint of [`Filter::mean`].
    fn mean_adjoint(&self, g: &[f64]) -> Vec<f64> {
        let scaled: Vec<f64> = g.iter().zip(&self.norm).map(|(v, z)| v / z).collect();
        self.convolve(&scaled)
    }
}

fn channel(img: &Image, c: usize) -> Vec<f64> {
    img.data.iter().skip(c).step_by(3).copied().collect()
}

struct SsimTerms {
    s: Vec<f64>,
    d_mu: Vec<f64>,
    d_xx: Vec<f64>,
    d_xy: Vec<f64>,
}

fn ssim_channel(f: &Filter, x: &[f64], y: &[f64], want_grad: bool) -> SsimTerms {
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(a, b)| a * b).collect();
    let (mx, my) = (f.mean(x), f.mean(y));
    let (exx, eyy, exy) = (f.mean(&xx), f.mean(&yy), f.mean(&xy));
    let n = x.len();
    let mut t = SsimTerms {
        s: vec![0.0; n],
        d_mu: Vec::new(),
        d_xx: Vec::new(),
        d_xy: Vec::new(),
    };
    if want_grad {
        t.d_mu = vec![0.0; n];
        t.d_xx = vec![0.0; n];
        t.d_xy = vec![0.0; n];
    }
    for p in 0..n {
        let (ux, uy) = (mx[p], my[p]);
        let vx = exx[p] - ux * ux;
        let vy = eyy[p] - uy * uy;
        let cxy = exy[p] - ux * uy;
        let a1 = 2.0 * ux * uy + SSIM_C1;
        let a2 = 2.0 * cxy + SSIM_C2;
        let b1 = ux * ux + uy * uy + SSIM_C1;
        let b2 = vx + vy + SSIM_C2;
        let s = a1 * a2 / (b1 * b2);
        t.s[p] = s;
        if want_grad {
            t.d_mu[p] = (2.0 * uy * a2 - 2.0 * uy * a1) / (b1 * b2) - s * (2.0 * ux / b1 - 2.0 * ux / b2);
            t.d_xx[p] = -s / b2;
            t.d_xy[p] = 2.0 * a1 / (b1 * b2);
        }
    }
    t
}

/// Mean SSIM over pixels and channels; windows are truncated at the border
/// and renormalized.
pub fn ssim(a: &Image, b: &Image) -> f64 {
    check_shape(a, b);
    let n = a.width as usize * a.height as usize;
    if n == 0 {
        return 1.0;
    }
    let f = Filter::new(a.width as usize, a.height as usize);
    let mut total = 0.0;
    for c in 0..3 {
        total += ssim_channel(&f, &channel(a, c), &channel(b, c), false).s.iter().sum::<f64>();
    }
    total / (3 * n) as f64
}

/// SSIM and its gradient with respect to `a`.
pub fn ssim_with_grad(a: &Image, b: &Image) -> (f64, Vec<f64>) {
    check_shape(a, b);
    let n = a.width as usize * a.height as usize;
    let mut grad = vec![0.0; 3 * n];
    if n == 0 {
        return (1.0, grad);
    }
    let f = Filter::new(a.width as usize, a.height as usize);
    let scale = 1.0 / (3 * n) as f64;
    let mut total = 0.0;
    for c in 0..3 {
        let (x, y) = (channel(a, c), channel(b, c));
        let t = ssim_channel(&f, &x, &y, true);
        total += t.s.iter().sum::<f64>();
        let g_mu = f.mean_adjoint(&t.d_mu);
        let g_xx = f.mean_adjoint(&t.d_xx);
        let g_xy = f.mean_adjoint(&t.d_xy);
        for p in 0..n {
            grad[3 * p + c] = scale * (g_mu[p] + 2.0 * x[p] * g_xx[p] + y[p] * g_xy[p]);
        }
    }
    (total * scale, grad)
}

/// (1 − λ) L1 + λ (1 − SSIM) / 2 with λ = 0.2.
pub fn rendering_loss(pred: &Image, gt: &Image) -> f64 {
    check_shape(pred, gt);
    if pred.data.is_empty() {
        return 0.0;
    }
    let l1 = pred.data.iter().zip(&gt.data).map(|(a, b)| (a - b).abs()).sum::<f64>() / pred.data.len() as f64;
    (1.0 - LAMBDA_DSSIM) * l1 + LAMBDA_DSSIM * (1.0 - ssim(pred, gt)) / 2.0
}

/// Loss and its gradient with respect to `pred`; the L1 subgradient at 0 is 0.
pub fn rendering_loss_with_grad(pred: &Image, gt: &Image) -> (f64, Vec<f64>) {
    check_shape(pred, gt);
    let n = pred.data.len();
    if n == 0 {
        return (0.0, Vec::new());
    }
    let (s, ds) = ssim_with_grad(pred, gt);
    let mut l1 = 0.0;
    let mut grad = vec![0.0; n];
    for i in 0..n {
        let d = pred.data[i] - gt.data[i];
        l1 += d.abs();
        let sign = if d > 0.0 {
            1.0
        } else if d < 0.0 {
            -1.0
        } else {
            0.0
        };
        grad[i] = (1.0 - LAMBDA_DSSIM) * sign / n as f64 - LAMBDA_DSSIM * 0.5 * ds[i];
    }
    let loss = (1.0 - LAMBDA_DSSIM) * l1 / n as f64 + LAMBDA_DSSIM * (1.0 - s) / 2.0;
    (loss, grad)
}
