use crate::error::{Error, Result};
use crate::slc::RealImage;

/// Offset added before the logarithm so dark pixels stay finite.
pub const LOG_EPSILON: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DespeckleConfig {
    /// Fidelity weight; larger keeps the output closer to the input.
    pub lambda: f64,
    pub iterations: usize,
    /// Denoise `ln(x + ε)` and map back, treating speckle as multiplicative.
    pub log_domain: bool,
}

impl Default for DespeckleConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            iterations: 50,
            log_domain: true,
        }
    }
}

/// Isotropic TV denoising `min_u |∇u| + λ/2 ‖u − f‖²` by split Bregman
/// iteration with one Gauss–Seidel sweep per iteration and Neumann
/// boundaries.
///
/// In log-domain mode the result is exponentiated and rescaled to the input
/// mean, since smoothing in the log domain removes the speckle log-bias.
pub fn despeckle(img: &RealImage, cfg: &DespeckleConfig) -> Result<RealImage> {
    if !(cfg.lambda > 0.0 && cfg.lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("despeckle lambda must be positive, got {}", cfg.lambda)));
    }
    if img.as_slice().iter().any(|&v| !(v >= 0.0)) {
        return Err(Error::InvalidParameter("despeckle input must be non-negative".into()));
    }
    if img.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("despeckle input"));
    }
    let n = img.size();
    let f: Vec<f64> = if cfg.log_domain {
        img.as_slice().iter().map(|v| (v + LOG_EPSILON).ln()).collect()
    } else {
        img.as_slice().to_vec()
    };
    let u = tv_split_bregman(&f, n, cfg.lambda, cfg.iterations);
    if !cfg.log_domain {
        return Ok(RealImage::from_vec_unchecked(n, u));
    }
    let mut out: Vec<f64> = u.iter().map(|v| (v.exp() - LOG_EPSILON).max(0.0)).collect();
    let target = img.mean();
    let mean = out.iter().sum::<f64>() / out.len() as f64;
    if mean > 0.0 {
        let gain = target / mean;
        for v in &mut out {
            *v *= gain;
        }
    }
    Ok(RealImage::from_vec_unchecked(n, out))
}

fn shrink(x: f64, y: f64, t: f64) -> (f64, f64) {
    let s = (x * x + y * y).sqrt();
    if s <= t {
        (0.0, 0.0)
    } else {
        let k = (s - t) / s;
        (k * x, k * y)
    }
}

fn tv_split_bregman(f: &[f64], n: usize, lambda: f64, iterations: usize) -> Vec<f64> {
    let beta = 2.0 * lambda;
    let idx = |r: usize, c: usize| r * n + c;
    let mut u = f.to_vec();
    let (mut dx, mut dy) = (vec![0.0; n * n], vec![0.0; n * n]);
    let (mut bx, mut by) = (vec![0.0; n * n], vec![0.0; n * n]);
    for _ in 0..iterations {
        // (λ + β∇ᵀ∇) u = λ f + β ∇ᵀ(d − b), one Gauss–Seidel sweep.
        for r in 0..n {
            for c in 0..n {
                let i = idx(r, c);
                let mut rhs = lambda * f[i];
                let mut nb = 0.0;
                let mut deg = 0.0;
                // ∇ᵀ p at (r,c) = p(r,c−1) − p(r,c) along each axis, with
                // the last forward difference defined as zero.
                let px = |p: &[f64], rr: usize, cc: usize| if cc + 1 < n { p[idx(rr, cc)] } else { 0.0 };
                let py = |p: &[f64], rr: usize, cc: usize| if rr + 1 < n { p[idx(rr, cc)] } else { 0.0 };
                let mut div = -(px(&dx, r, c) - px(&bx, r, c)) - (py(&dy, r, c) - py(&by, r, c));
                if c > 0 {
                    div += px(&dx, r, c - 1) - px(&bx, r, c - 1);
                    nb += u[idx(r, c - 1)];
                    deg += 1.0;
                }
                if r > 0 {
                    div += py(&dy, r - 1, c) - py(&by, r - 1, c);
                    nb += u[idx(r - 1, c)];
                    deg += 1.0;
                }
                if c + 1 < n {
                    nb += u[idx(r, c + 1)];
                    deg += 1.0;
                }
                if r + 1 < n {
                    nb += u[idx(r + 1, c)];
                    deg += 1.0;
                }
                rhs += beta * div;
                u[i] = (rhs + beta * nb) / (lambda + beta * deg);
            }
        }
        for r in 0..n {
            for c in 0..n {
                let i = idx(r, c);
                let gx = if c + 1 < n { u[idx(r, c + 1)] - u[i] } else { 0.0 };
                let gy = if r + 1 < n { u[idx(r + 1, c)] - u[i] } else { 0.0 };
                let (sx, sy) = shrink(gx + bx[i], gy + by[i], 1.0 / beta);
                dx[i] = sx;
                dy[i] = sy;
                bx[i] += gx - sx;
                by[i] += gy - sy;
            }
        }
    }
    u
}
