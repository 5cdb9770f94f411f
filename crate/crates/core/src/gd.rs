//! Iterative sharpness-metric autofocus: fixed-step gradient descent on the
//! negated (optionally weighted) sharpness over the phase-polynomial
//! coefficients, starting from zero.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::metrics::{MetricKind, SharpnessObjective};
use crate::slc::{correct_spectrum, fft_along_track, PhasePolynomial, RealImage, SlcImage};

/// Learning-rate grid searched by [`crossval_lr`]: ten decades, `1e-6 ..= 1e3`.
pub fn default_lr_grid() -> Vec<f64> {
    (-6..=3).map(|e| 10f64.powi(e)).collect()
}

pub const DEFAULT_ITERATIONS: usize = 10;

/// Map from the defocused magnitude image to a non-negative weight image.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum WeightFn {
    #[default]
    Identity,
    /// Zero where the local standard deviation of `|g_e|` over a
    /// `window × window` neighbourhood is strictly below the given quantile of
    /// all local standard deviations.
    LowContrast { window: usize, quantile: f64 },
}

impl WeightFn {
    pub fn identity() -> Self {
        WeightFn::Identity
    }

    pub fn low_contrast(window: usize, quantile: f64) -> Result<Self> {
        let w = WeightFn::LowContrast { window, quantile };
        w.validate()?;
        Ok(w)
    }

    fn validate(&self) -> Result<()> {
        if let WeightFn::LowContrast { window, quantile } = *self {
            if window < 3 || window % 2 == 0 {
                return Err(Error::InvalidParameter(format!(
                    "window must be odd and >= 3, got {window}"
                )));
            }
            if !(quantile > 0.0 && quantile < 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "quantile must lie in (0, 1), got {quantile}"
                )));
            }
        }
        Ok(())
    }

    /// Weight image for the given defocused magnitudes; `None` for identity.
    pub fn compute(&self, magnitudes: &RealImage) -> Result<Option<RealImage>> {
        self.validate()?;
        match *self {
            WeightFn::Identity => Ok(None),
            WeightFn::LowContrast { window, quantile } => {
                let local = local_std(magnitudes, window / 2);
                let threshold = quantile_linear(local.as_slice(), quantile);
                let w = local
                    .as_slice()
                    .iter()
                    .map(|&s| if s < threshold { 0.0 } else { 1.0 })
                    .collect();
                Ok(Some(RealImage::from_vec_unchecked(magnitudes.size(), w)))
            }
        }
    }

    /// Dense weight image, all ones for identity.
    pub fn weight_image(&self, magnitudes: &RealImage) -> Result<RealImage> {
        Ok(self
            .compute(magnitudes)?
            .unwrap_or_else(|| RealImage::filled(magnitudes.size(), 1.0)))
    }
}

impl fmt::Display for WeightFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightFn::Identity => f.write_str("identity"),
            WeightFn::LowContrast { window, quantile } => {
                write!(f, "lowcontrast:{window}:{quantile}")
            }
        }
    }
}

impl FromStr for WeightFn {
    type Err = Error;

    /// `identity`, `lowcontrast` (window 5, quantile 0.25) or
    /// `lowcontrast:<window>:<quantile>`.
    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split(':');
        match parts.next() {
            Some("identity") if parts.next().is_none() => Ok(WeightFn::Identity),
            Some("lowcontrast") => {
                let window = parts.next().map_or(Ok(5), str::parse).map_err(|_| {
                    Error::InvalidParameter(format!("bad lowcontrast window in `{s}`"))
                })?;
                let quantile = parts.next().map_or(Ok(0.25), str::parse).map_err(|_| {
                    Error::InvalidParameter(format!("bad lowcontrast quantile in `{s}`"))
                })?;
                WeightFn::low_contrast(window, quantile)
            }
            _ => Err(Error::InvalidParameter(format!("unknown weight function `{s}`"))),
        }
    }
}

/// Population standard deviation over a `(2r+1)²` window clipped to the image.
fn local_std(img: &RealImage, radius: usize) -> RealImage {
    let m = img.size();
    let stride = m + 1;
    // Summed-area tables of v and v².
    let mut s1 = vec![0.0; stride * stride];
    let mut s2 = vec![0.0; stride * stride];
    for r in 0..m {
        for c in 0..m {
            let v = img.get(r, c);
            let i = (r + 1) * stride + c + 1;
            s1[i] = v + s1[i - 1] + s1[i - stride] - s1[i - stride - 1];
            s2[i] = v * v + s2[i - 1] + s2[i - stride] - s2[i - stride - 1];
        }
    }
    let rect = |t: &[f64], r0: usize, r1: usize, c0: usize, c1: usize| {
        t[r1 * stride + c1] - t[r0 * stride + c1] - t[r1 * stride + c0] + t[r0 * stride + c0]
    };
    let mut out = Vec::with_capacity(m * m);
    for r in 0..m {
        let (r0, r1) = (r.saturating_sub(radius), (r + radius + 1).min(m));
        for c in 0..m {
            let (c0, c1) = (c.saturating_sub(radius), (c + radius + 1).min(m));
            let n = ((r1 - r0) * (c1 - c0)) as f64;
            let mean = rect(&s1, r0, r1, c0, c1) / n;
            let var = rect(&s2, r0, r1, c0, c1) / n - mean * mean;
            out.push(var.max(0.0).sqrt());
        }
    }
    RealImage::from_vec_unchecked(m, out)
}

/// Linear-interpolation quantile of the sorted values.
fn quantile_linear(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = q * (v.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GdConfig {
    pub metric: MetricKind,
    pub learning_rate: f64,
    pub iterations: usize,
    pub weight: WeightFn,
}

impl GdConfig {
    pub fn new(metric: MetricKind, learning_rate: f64) -> Self {
        Self {
            metric,
            learning_rate,
            iterations: DEFAULT_ITERATIONS,
            weight: WeightFn::Identity,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidParameter("iterations must be >= 1".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "learning rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FocusResult {
    pub g_hat: SlcImage,
    pub phi_hat: PhasePolynomial,
    /// Objective after each update (GD), or the single pipeline loss (learned).
    pub trace: Vec<f64>,
    /// Coefficients after each update, parallel to `trace`.
    pub coeff_trace: Vec<PhasePolynomial>,
    /// Objective at the starting point.
    pub initial_objective: f64,
}

impl FocusResult {
    /// Oriented sharpness reached, i.e. the negated final objective.
    pub fn final_sharpness(&self) -> f64 {
        -self.trace.last().copied().unwrap_or(self.initial_objective)
    }
}

/// Gradient-descent autofocus of one image.
pub fn focus_gd(g_e: &SlcImage, cfg: &GdConfig) -> Result<FocusResult> {
    cfg.validate()?;
    let spectrum = fft_along_track(g_e)?;
    let weights = cfg.weight.compute(&g_e.magnitude_image())?;
    let objective =
        SharpnessObjective::new(cfg.metric, &spectrum, weights.as_ref().map(RealImage::as_slice))?;

    let mut coeffs = PhasePolynomial::zero();
    let first = objective.value_and_grad(&coeffs)?;
    let initial_objective = first.objective;
    let mut grad = first.d_coeffs;
    if !initial_objective.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::Divergence { iteration: 0 });
    }

    let mut trace = Vec::with_capacity(cfg.iterations);
    let mut coeff_trace = Vec::with_capacity(cfg.iterations);
    for iteration in 1..=cfg.iterations {
        for (c, g) in coeffs.coeffs_mut().iter_mut().zip(grad) {
            *c -= cfg.learning_rate * g;
        }
        if !coeffs.is_finite() {
            return Err(Error::Divergence { iteration });
        }
        let value = if iteration < cfg.iterations {
            let step = objective.value_and_grad(&coeffs)?;
            grad = step.d_coeffs;
            if grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Divergence { iteration });
            }
            step.objective
        } else {
            objective.value(&coeffs)?
        };
        if !value.is_finite() {
            return Err(Error::Divergence { iteration });
        }
        trace.push(value);
        coeff_trace.push(coeffs);
    }

    Ok(FocusResult {
        g_hat: correct_spectrum(&spectrum, &coeffs)?,
        phi_hat: coeffs,
        trace,
        coeff_trace,
        initial_objective,
    })
}

/// Score of one learning rate: mean oriented sharpness after GD, or `None`
/// if any image diverges.
pub fn lr_score(images: &[SlcImage], cfg: &GdConfig) -> Result<Option<f64>> {
    let mut total = 0.0;
    for g in images {
        match focus_gd(g, cfg) {
            Ok(r) => total += r.final_sharpness(),
            Err(Error::Divergence { .. }) => return Ok(None),
            Err(e) => return Err(e),
        }
    }
    let mean = total / images.len() as f64;
    Ok(mean.is_finite().then_some(mean))
}

/// Picks the grid learning rate with the best mean final sharpness over
/// `images`. Ties go to the smaller rate; rates that diverge on any image
/// are skipped.
pub fn crossval_lr(
    images: &[SlcImage],
    metric: MetricKind,
    grid: &[f64],
    iterations: usize,
    weight: WeightFn,
) -> Result<f64> {
    if images.is_empty() || grid.is_empty() {
        return Err(Error::InvalidParameter(
            "cross-validation needs at least one image and one learning rate".into(),
        ));
    }
    let mut rates = grid.to_vec();
    rates.sort_by(f64::total_cmp);
    let mut best: Option<(f64, f64)> = None;
    for &lr in &rates {
        if !(lr > 0.0) {
            return Err(Error::InvalidParameter(format!("learning rate {lr} is not positive")));
        }
        let cfg = GdConfig {
            metric,
            learning_rate: lr,
            iterations,
            weight,
        };
        if let Some(score) = lr_score(images, &cfg)? {
            if best.map_or(true, |(_, s)| score > s) {
                best = Some((lr, score));
            }
        }
    }
    best.map(|(lr, _)| lr).ok_or(Error::Divergence { iteration: 0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::slc::correct;
    use crate::synth::{corrupt, gen_scene, Rng, SceneSpec, Texture};
    use num_complex::Complex64;

    fn scene(size: usize, seed: u64) -> SlcImage {
        gen_scene(&SceneSpec {
            size,
            seed,
            scatterer_count: 6,
            scatterer_snr_db: 25.0,
            texture: Texture::Flat,
        })
        .unwrap()
    }

    #[test]
    fn default_grid_is_ten_decades() {
        let g = default_lr_grid();
        assert_eq!(g.len(), 10);
        assert_eq!(g[0], 1e-6);
        assert_eq!(g[9], 1e3);
    }

    #[test]
    fn identity_weight_is_all_ones() {
        let mags = scene(16, 1).magnitude_image();
        let w = WeightFn::identity().weight_image(&mags).unwrap();
        assert!(w.as_slice().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn constant_image_keeps_every_pixel() {
        let mags = RealImage::filled(16, 2.5);
        let w = WeightFn::low_contrast(3, 0.5).unwrap().weight_image(&mags).unwrap();
        assert!(w.as_slice().iter().all(|&v| v == 1.0));
    }

    fn brute_local_std(mags: &RealImage, r: usize, c: usize, radius: usize) -> f64 {
        let m = mags.size();
        let mut vals = vec![];
        for rr in r.saturating_sub(radius)..(r + radius + 1).min(m) {
            for cc in c.saturating_sub(radius)..(c + radius + 1).min(m) {
                vals.push(mags.get(rr, cc));
            }
        }
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64).sqrt()
    }

    #[test]
    fn low_contrast_masks_flat_half() {
        // Rows 0..16 flat, rows 16..32 Rayleigh speckle.
        let m = 32;
        let mut rng = Rng::new(4);
        let mut data = vec![1.0; m * m];
        for v in data[m * m / 2..].iter_mut() {
            *v = Complex64::new(rng.gaussian(), rng.gaussian()).norm();
        }
        let mags = RealImage::from_vec(m, data).unwrap();
        let w = WeightFn::low_contrast(3, 0.5).unwrap().weight_image(&mags).unwrap();

        // Oracle: brute-force local stddev and a sorted-list median.
        let stds: Vec<f64> = (0..m * m).map(|i| brute_local_std(&mags, i / m, i % m, 1)).collect();
        let mut sorted = stds.clone();
        sorted.sort_by(f64::total_cmp);
        let h = 0.5 * (sorted.len() - 1) as f64;
        let threshold = sorted[h as usize] + h.fract() * (sorted[h as usize + 1] - sorted[h as usize]);
        for (i, s) in stds.iter().enumerate() {
            let expected = if *s < threshold - 1e-12 { 0.0 } else if *s > threshold + 1e-12 { 1.0 } else { continue };
            assert_eq!(w.as_slice()[i], expected, "pixel {i}");
        }

        // Flat interior is fully masked; the speckled interior is almost
        // entirely kept (a few low-contrast speckle windows fall under the median).
        for r in 0..m / 2 - 1 {
            for c in 0..m {
                assert_eq!(w.get(r, c), 0.0, "flat ({r},{c})");
            }
        }
        let kept = (m / 2 + 1..m)
            .flat_map(|r| (0..m).map(move |c| (r, c)))
            .filter(|&(r, c)| w.get(r, c) == 1.0)
            .count();
        let total = (m / 2 - 1) * m;
        assert!(kept as f64 >= 0.9 * total as f64, "{kept}/{total}");
    }

    #[test]
    fn weight_validation_and_parsing() {
        assert!(WeightFn::low_contrast(4, 0.5).is_err());
        assert!(WeightFn::low_contrast(1, 0.5).is_err());
        assert!(WeightFn::low_contrast(3, 1.0).is_err());
        assert_eq!("identity".parse::<WeightFn>().unwrap(), WeightFn::Identity);
        assert_eq!(
            "lowcontrast:7:0.3".parse::<WeightFn>().unwrap(),
            WeightFn::LowContrast { window: 7, quantile: 0.3 }
        );
        assert!("lowcontrast:2".parse::<WeightFn>().is_err());
        assert!("fienup".parse::<WeightFn>().is_err());
    }

    #[test]
    fn zero_rate_is_a_fixed_point() {
        let g = scene(16, 2);
        let cfg = GdConfig {
            learning_rate: 0.0,
            ..GdConfig::new(MetricKind::Mns, 0.0)
        };
        let r = focus_gd(&g, &cfg).unwrap();
        assert_eq!(r.phi_hat, PhasePolynomial::zero());
        assert!(r.g_hat.relative_l2(&g) < 1e-12);
        assert_eq!(r.trace.len(), 10);
    }

    #[test]
    fn single_iteration_takes_one_step() {
        let g = corrupt(&scene(16, 3), &PhasePolynomial::monomial(2, 2.0)).unwrap();
        let cfg = GdConfig {
            iterations: 1,
            ..GdConfig::new(MetricKind::Ssi, 1e-4)
        };
        let r = focus_gd(&g, &cfg).unwrap();
        assert_eq!(r.trace.len(), 1);
        let spec = fft_along_track(&g).unwrap();
        let grad = crate::metrics::sharpness_grad(MetricKind::Ssi, &spec, &PhasePolynomial::zero(), None)
            .unwrap();
        for (c, d) in r.phi_hat.coeffs().iter().zip(grad.d_coeffs) {
            assert_eq!(*c, -1e-4 * d);
        }
    }

    #[test]
    fn result_is_deterministic_and_consistent() {
        let g = corrupt(&scene(32, 4), &PhasePolynomial::monomial(2, 4.0)).unwrap();
        let cfg = GdConfig::new(MetricKind::Me, 1e-3);
        let a = focus_gd(&g, &cfg).unwrap();
        let b = focus_gd(&g, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.g_hat, correct(&g, &a.phi_hat).unwrap());
    }

    #[test]
    fn global_phase_offset_does_not_change_result_magnitude() {
        let base = scene(32, 5);
        let p = PhasePolynomial::monomial(2, 3.0);
        let a = corrupt(&base, &p).unwrap();
        let rot = Complex64::from_polar(1.0, 1.1);
        let b = SlcImage::from_vec(32, a.as_slice().iter().map(|z| z * rot).collect()).unwrap();
        let cfg = GdConfig::new(MetricKind::Mns, 1e-2);
        let ra = focus_gd(&a, &cfg).unwrap();
        let rb = focus_gd(&b, &cfg).unwrap();
        for (x, y) in ra.g_hat.magnitudes().iter().zip(rb.g_hat.magnitudes()) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn invalid_config() {
        let g = scene(16, 6);
        let cfg = GdConfig {
            iterations: 0,
            ..GdConfig::new(MetricKind::Mns, 1.0)
        };
        assert!(focus_gd(&g, &cfg).is_err());
        assert!(focus_gd(&g, &GdConfig::new(MetricKind::Mns, f64::NAN)).is_err());
    }

    #[test]
    fn huge_rate_diverges_with_iteration_index() {
        let g = corrupt(&scene(16, 7), &PhasePolynomial::monomial(2, 3.0)).unwrap();
        let cfg = GdConfig::new(MetricKind::Ssi, f64::MAX);
        assert!(matches!(focus_gd(&g, &cfg), Err(Error::Divergence { .. })));
    }

    #[test]
    fn crossval_edge_cases() {
        let imgs = vec![corrupt(&scene(16, 8), &PhasePolynomial::monomial(2, 3.0)).unwrap()];
        assert_eq!(
            crossval_lr(&imgs, MetricKind::Mns, &[0.05], 3, WeightFn::Identity).unwrap(),
            0.05
        );
        assert!(crossval_lr(&[], MetricKind::Mns, &[0.1], 3, WeightFn::Identity).is_err());
        assert!(crossval_lr(&imgs, MetricKind::Mns, &[], 3, WeightFn::Identity).is_err());
    }

    #[test]
    fn crossval_ignores_image_order() {
        let mut imgs: Vec<SlcImage> = (0..3)
            .map(|i| corrupt(&scene(16, 20 + i), &PhasePolynomial::monomial(2, 2.0 + i as f64)).unwrap())
            .collect();
        let grid = [1e-3, 1e-2, 1e-1, 1.0];
        let a = crossval_lr(&imgs, MetricKind::Mns, &grid, 5, WeightFn::Identity).unwrap();
        imgs.reverse();
        let b = crossval_lr(&imgs, MetricKind::Mns, &grid, 5, WeightFn::Identity).unwrap();
        assert_eq!(a, b);
    }
}
