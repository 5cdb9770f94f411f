//! Image sharpness metrics and their gradients with respect to the phase
//! polynomial through the k-space correction.
//!
//! The raw functions [`mns`], [`me`], [`osf`] and [`ssi`] return the metric
//! expressions as printed. [`MetricKind::sharpness`] orients each one so that
//! larger always means sharper, which is the quantity the optimizers
//! maximize:
//!
//! | kind | oriented sharpness            |
//! |------|-------------------------------|
//! | MNS  | `stddev(|g|) / mean(|g|)`     |
//! | ME   | `Σ |g|² ln |g|²`              |
//! | OSF  | `−Σ ln(|g|² + b)`             |
//! | SSI  | `Σ |g|⁴`                      |
//!
//! With energy conserved by the unitary correction, concentrating intensity
//! raises `Σ I ln I` and lowers `Σ ln(I + b)`, hence the OSF negation.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::slc::{
    apply_phase, eval_phase, ifft_along_track, phase::monomial_basis, ApertureSpectrum,
    PhasePolynomial, PhaseSign, SlcImage, NUM_COEFFS,
};

/// OSF stabilizer default.
pub const DEFAULT_OSF_B: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MetricKind {
    Mns,
    Me,
    Osf { b: f64 },
    Ssi,
}

impl MetricKind {
    pub const ALL: [MetricKind; 4] = [
        MetricKind::Mns,
        MetricKind::Me,
        MetricKind::Osf { b: DEFAULT_OSF_B },
        MetricKind::Ssi,
    ];

    pub fn osf() -> Self {
        MetricKind::Osf { b: DEFAULT_OSF_B }
    }

    pub fn name(&self) -> &'static str {
        match self {
            MetricKind::Mns => "mns",
            MetricKind::Me => "me",
            MetricKind::Osf { .. } => "osf",
            MetricKind::Ssi => "ssi",
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            MetricKind::Osf { b } if !(b > 0.0 && b.is_finite()) => Err(
                Error::InvalidParameter(format!("OSF stabilizer must be positive, got {b}")),
            ),
            _ => Ok(()),
        }
    }

    /// Oriented sharpness of a magnitude image: larger is sharper.
    pub fn sharpness(&self, mags: &[f64]) -> Result<f64> {
        match *self {
            MetricKind::Mns => mns(mags),
            MetricKind::Me => Ok(me(mags)),
            MetricKind::Osf { b } => osf(mags, b).map(|v| -v),
            MetricKind::Ssi => Ok(ssi(mags)),
        }
    }

    /// Oriented sharpness and its derivative with respect to each magnitude.
    pub fn sharpness_with_derivative(&self, mags: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.validate()?;
        let value = self.sharpness(mags)?;
        let deriv = match *self {
            MetricKind::Mns => {
                let n = mags.len() as f64;
                let (mean, std) = mean_std(mags);
                mags.iter()
                    .map(|&v| {
                        let spread = if std > 0.0 { (v - mean) / (n * std * mean) } else { 0.0 };
                        spread - std / (n * mean * mean)
                    })
                    .collect()
            }
            MetricKind::Me => mags
                .iter()
                .map(|&v| if v > 0.0 { 2.0 * v * ((v * v).ln() + 1.0) } else { 0.0 })
                .collect(),
            MetricKind::Osf { b } => mags.iter().map(|&v| -2.0 * v / (v * v + b)).collect(),
            MetricKind::Ssi => mags.iter().map(|&v| 4.0 * v * v * v).collect(),
        };
        Ok((value, deriv))
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mns" => Ok(MetricKind::Mns),
            "me" => Ok(MetricKind::Me),
            "osf" => Ok(MetricKind::osf()),
            "ssi" => Ok(MetricKind::Ssi),
            other => Err(Error::InvalidParameter(format!("unknown metric `{other}`"))),
        }
    }
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Mean-normalized standard deviation (population stddev).
pub fn mns(mags: &[f64]) -> Result<f64> {
    if mags.is_empty() {
        return Err(Error::UndefinedMetric("MNS of an empty image"));
    }
    let (mean, std) = mean_std(mags);
    if !(mean > 0.0) {
        return Err(Error::UndefinedMetric("MNS needs a non-zero mean magnitude"));
    }
    Ok(std / mean)
}

/// `Σ |g|² ln |g|²` with `0 ln 0 = 0`.
pub fn me(mags: &[f64]) -> f64 {
    mags.iter()
        .map(|&v| {
            let i = v * v;
            if i > 0.0 {
                i * i.ln()
            } else {
                0.0
            }
        })
        .sum()
}

/// `Σ ln(|g|² + b)`.
pub fn osf(mags: &[f64], b: f64) -> Result<f64> {
    if !(b > 0.0) {
        return Err(Error::InvalidParameter(format!("OSF stabilizer must be positive, got {b}")));
    }
    Ok(mags.iter().map(|&v| (v * v + b).ln()).sum())
}

/// `Σ |g|⁴`.
pub fn ssi(mags: &[f64]) -> f64 {
    mags.iter().map(|&v| (v * v) * (v * v)).sum()
}

/// Objective value `−𝓜` and its gradient over the nine coefficients.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricGradient {
    pub objective: f64,
    pub d_coeffs: [f64; NUM_COEFFS],
}

/// `J(c) = −𝓜(w ⊙ |F⁻¹{exp(−iφ_c) ⊙ G_e}|)` for a fixed spectrum.
pub struct SharpnessObjective<'a> {
    kind: MetricKind,
    spectrum: &'a ApertureSpectrum,
    weights: Option<&'a [f64]>,
    basis: Vec<[f64; NUM_COEFFS]>,
}

impl<'a> SharpnessObjective<'a> {
    pub fn new(
        kind: MetricKind,
        spectrum: &'a ApertureSpectrum,
        weights: Option<&'a [f64]>,
    ) -> Result<Self> {
        kind.validate()?;
        if let Some(w) = weights {
            if w.len() != spectrum.as_slice().len() {
                return Err(Error::Shape {
                    expected: format!("{} weights", spectrum.as_slice().len()),
                    actual: format!("{}", w.len()),
                });
            }
        }
        Ok(Self {
            kind,
            spectrum,
            weights,
            basis: monomial_basis(spectrum.size()),
        })
    }

    pub fn kind(&self) -> MetricKind {
        self.kind
    }

    fn corrected(&self, p: &PhasePolynomial) -> Result<(ApertureSpectrum, SlcImage)> {
        let phi = eval_phase(p, self.spectrum.size());
        let h = apply_phase(self.spectrum, &phi, PhaseSign::Correct)?;
        let g = ifft_along_track(&h)?;
        Ok((h, g))
    }

    fn weighted(&self, mags: Vec<f64>) -> Vec<f64> {
        match self.weights {
            Some(w) => mags.iter().zip(w).map(|(a, w)| a * w).collect(),
            None => mags,
        }
    }

    /// Objective only.
    pub fn value(&self, p: &PhasePolynomial) -> Result<f64> {
        let (_, g) = self.corrected(p)?;
        Ok(-self.kind.sharpness(&self.weighted(g.magnitudes()))?)
    }

    /// Objective and exact gradient.
    ///
    /// Reverse pass: the magnitude cotangent becomes `r = ∂J/∂|g| · g/|g|`,
    /// the adjoint of the unitary inverse transform is the forward
    /// transform, and `∂J/∂φ_n = Σ_r Im(conj(R̃[n,r]) H[n,r])` where `H` is
    /// the corrected spectrum.
    pub fn value_and_grad(&self, p: &PhasePolynomial) -> Result<MetricGradient> {
        let (h, g) = self.corrected(p)?;
        let mags = g.magnitudes();
        let v = self.weighted(mags.clone());
        let (s, ds_dv) = self.kind.sharpness_with_derivative(&v)?;

        let size = g.size();
        let cotangent: Vec<Complex64> = g
            .as_slice()
            .iter()
            .zip(&mags)
            .enumerate()
            .map(|(i, (z, &a))| {
                if a == 0.0 {
                    return Complex64::new(0.0, 0.0);
                }
                let w = self.weights.map_or(1.0, |w| w[i]);
                let dj_da = -w * ds_dv[i];
                z * (dj_da / a)
            })
            .collect();
        let r_tilde = crate::slc::fft::adjoint_of_inverse(size, &cotangent);

        let mut d_coeffs = [0.0; NUM_COEFFS];
        for (n, basis_row) in self.basis.iter().enumerate() {
            let row = n * size..(n + 1) * size;
            let dj_dphi: f64 = r_tilde[row.clone()]
                .iter()
                .zip(&h.as_slice()[row])
                .map(|(r, hv)| (r.conj() * hv).im)
                .sum();
            for (d, u) in d_coeffs.iter_mut().zip(basis_row) {
                *d += u * dj_dphi;
            }
        }
        Ok(MetricGradient {
            objective: -s,
            d_coeffs,
        })
    }
}

/// Gradient of the negated (optionally weighted) sharpness with respect to
/// the phase coefficients.
pub fn sharpness_grad(
    kind: MetricKind,
    spectrum: &ApertureSpectrum,
    p: &PhasePolynomial,
    weights: Option<&[f64]>,
) -> Result<MetricGradient> {
    SharpnessObjective::new(kind, spectrum, weights)?.value_and_grad(p)
}
