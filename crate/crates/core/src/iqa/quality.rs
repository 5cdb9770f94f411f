use crate::error::{Error, Result};
use crate::slc::RealImage;

/// Per-scale exponents from the standard five-scale construction.
pub const MS_SSIM_WEIGHTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];
const WINDOW: usize = 11;
const SIGMA: f64 = 1.5;
const K1: f64 = 0.01;
const K2: f64 = 0.03;

fn check_shapes(a: &RealImage, b: &RealImage) -> Result<()> {
    if a.size() != b.size() {
        return Err(Error::Shape {
            expected: format!("{0}x{0}", a.size()),
            actual: format!("{0}x{0}", b.size()),
        });
    }
    Ok(())
}

/// `10·log10(1 / MSE)` with unit peak; identical images give `+∞`.
pub fn psnr(reference: &RealImage, test: &RealImage) -> Result<f64> {
    check_shapes(reference, test)?;
    let n = reference.as_slice().len() as f64;
    let mse = reference
        .as_slice()
        .iter()
        .zip(test.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n;
    Ok(if mse == 0.0 { f64::INFINITY } else { -10.0 * mse.log10() })
}

fn gaussian_kernel() -> [f64; WINDOW] {
    let mut k = [0.0; WINDOW];
    let c = (WINDOW / 2) as f64;
    for (i, v) in k.iter_mut().enumerate() {
        let x = i as f64 - c;
        *v = (-x * x / (2.0 * SIGMA * SIGMA)).exp();
    }
    let s: f64 = k.iter().sum();
    k.map(|v| v / s)
}

/// Separable Gaussian filter keeping only fully covered positions.
fn filter_valid(x: &[f64], n: usize, k: &[f64; WINDOW]) -> Vec<f64> {
    let m = n + 1 - WINDOW;
    let mut tmp = vec![0.0; n * m];
    for r in 0..n {
        for c in 0..m {
            tmp[r * m + c] = k.iter().enumerate().map(|(j, w)| w * x[r * n + c + j]).sum();
        }
    }
    let mut out = vec![0.0; m * m];
    for r in 0..m {
        for c in 0..m {
            out[r * m + c] = k.iter().enumerate().map(|(j, w)| w * tmp[(r + j) * m + c]).sum();
        }
    }
    out
}

/// Mean luminance term and mean contrast-structure term at one scale.
fn ssim_terms(a: &[f64], b: &[f64], n: usize, k: &[f64; WINDOW]) -> (f64, f64) {
    let c1 = K1 * K1;
    let c2 = K2 * K2;
    let prod = |x: &[f64], y: &[f64]| -> Vec<f64> { x.iter().zip(y).map(|(p, q)| p * q).collect() };
    let mu_a = filter_valid(a, n, k);
    let mu_b = filter_valid(b, n, k);
    let aa = filter_valid(&prod(a, a), n, k);
    let bb = filter_valid(&prod(b, b), n, k);
    let ab = filter_valid(&prod(a, b), n, k);
    let count = mu_a.len() as f64;
    let (mut lum, mut cs) = (0.0, 0.0);
    for i in 0..mu_a.len() {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = aa[i] - ma * ma;
        let vb = bb[i] - mb * mb;
        let cov = ab[i] - ma * mb;
        lum += (2.0 * ma * mb + c1) / (ma * ma + mb * mb + c1);
        cs += (2.0 * cov + c2) / (va + vb + c2);
    }
    (lum / count, cs / count)
}

/// 2×2 block mean; an odd trailing row and column are dropped.
fn downsample(x: &[f64], n: usize) -> (Vec<f64>, usize) {
    let m = n / 2;
    let at = |r: usize, c: usize| x[r * n + c];
    let mut out = vec![0.0; m * m];
    for r in 0..m {
        for c in 0..m {
            let (r2, c2) = (2 * r, 2 * c);
            out[r * m + c] = 0.25 * (at(r2, c2) + at(r2, c2 + 1) + at(r2 + 1, c2) + at(r2 + 1, c2 + 1));
        }
    }
    (out, m)
}

/// Number of scales whose coarsest image still holds one full window.
pub fn ms_ssim_scales(size: usize) -> usize {
    let mut scales = 0;
    let mut n = size;
    while scales < MS_SSIM_WEIGHTS.len() && n >= WINDOW {
        scales += 1;
        n /= 2;
    }
    scales
}

/// Multi-scale SSIM with an 11×11 Gaussian window (σ = 1.5) and unit
/// dynamic range. Images too small for five scales drop the coarsest
/// scales and renormalize the remaining exponents to sum to one. Negative
/// per-scale terms are clamped to zero, so the result lies in `[0, 1]`.
pub fn ms_ssim(reference: &RealImage, test: &RealImage) -> Result<f64> {
    check_shapes(reference, test)?;
    let scales = ms_ssim_scales(reference.size());
    if scales == 0 {
        return Err(Error::Size(format!(
            "MS-SSIM needs at least {WINDOW}x{WINDOW}, got {0}x{0}",
            reference.size()
        )));
    }
    let total: f64 = MS_SSIM_WEIGHTS[..scales].iter().sum();
    let kernel = gaussian_kernel();
    let mut a = reference.as_slice().to_vec();
    let mut b = test.as_slice().to_vec();
    let mut n = reference.size();
    let mut value = 1.0;
    for (s, w) in MS_SSIM_WEIGHTS[..scales].iter().enumerate() {
        let weight = w / total;
        let (lum, cs) = ssim_terms(&a, &b, n, &kernel);
        value *= cs.clamp(0.0, 1.0).powf(weight);
        if s + 1 == scales {
            value *= lum.clamp(0.0, 1.0).powf(weight);
        } else {
            let (da, m) = downsample(&a, n);
            let (db, _) = downsample(&b, n);
            a = da;
            b = db;
            n = m;
        }
    }
    Ok(value)
}
