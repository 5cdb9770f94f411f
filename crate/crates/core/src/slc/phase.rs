use num_complex::Complex64;

use super::ApertureSpectrum;
use crate::error::{Error, Result};

/// Lowest and highest modelled polynomial degree. Degrees 0 and 1 are a
/// global phase and an along-track shift; neither changes focus.
pub const MIN_DEGREE: usize = 2;
pub const MAX_DEGREE: usize = 10;
pub const NUM_COEFFS: usize = MAX_DEGREE - MIN_DEGREE + 1;

/// Aperture phase error `φ(u) = Σ_{d=2}^{10} c_d u^d` over the normalized
/// aperture coordinate `u ∈ [−1, 1]`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PhasePolynomial {
    coeffs: [f64; NUM_COEFFS],
}

impl PhasePolynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Coefficients ordered by degree, `c_2` first.
    pub fn new(coeffs: [f64; NUM_COEFFS]) -> Self {
        Self { coeffs }
    }

    pub fn from_slice(coeffs: &[f64]) -> Result<Self> {
        let coeffs: [f64; NUM_COEFFS] = coeffs.try_into().map_err(|_| Error::Shape {
            expected: format!("{NUM_COEFFS} coefficients"),
            actual: format!("{} coefficients", coeffs.len()),
        })?;
        Ok(Self { coeffs })
    }

    /// A single monomial term.
    pub fn monomial(degree: usize, coeff: f64) -> Self {
        assert!((MIN_DEGREE..=MAX_DEGREE).contains(&degree), "degree {degree} not modelled");
        let mut p = Self::zero();
        p.coeffs[degree - MIN_DEGREE] = coeff;
        p
    }

    pub fn coeffs(&self) -> &[f64; NUM_COEFFS] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64; NUM_COEFFS] {
        &mut self.coeffs
    }

    pub fn coeff(&self, degree: usize) -> f64 {
        self.coeffs[degree - MIN_DEGREE]
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            coeffs: self.coeffs.map(|c| a * c),
        }
    }

    pub fn negated(&self) -> Self {
        self.scaled(-1.0)
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }
}

impl std::ops::Add for PhasePolynomial {
    type Output = Self;

    fn add(mut self, rhs: Self) -> Self {
        for (a, b) in self.coeffs.iter_mut().zip(rhs.coeffs) {
            *a += b;
        }
        self
    }
}

/// `u_n = 2n/(M−1) − 1` for `n = 0..M`.
pub fn aperture_grid(m: usize) -> Vec<f64> {
    if m < 2 {
        return vec![0.0; m];
    }
    let step = 2.0 / (m - 1) as f64;
    (0..m).map(|n| n as f64 * step - 1.0).collect()
}

/// Monomials `u_n^d`, `d = 2..=10`, one row per aperture sample.
pub(crate) fn monomial_basis(m: usize) -> Vec<[f64; NUM_COEFFS]> {
    aperture_grid(m)
        .into_iter()
        .map(|u| {
            let mut row = [0.0; NUM_COEFFS];
            let mut power = u * u;
            for slot in row.iter_mut() {
                *slot = power;
                power *= u;
            }
            row
        })
        .collect()
}

/// Evaluates the phase polynomial on the `M`-point aperture grid.
pub fn eval_phase(p: &PhasePolynomial, m: usize) -> Vec<f64> {
    monomial_basis(m)
        .iter()
        .map(|row| row.iter().zip(&p.coeffs).map(|(u, c)| u * c).sum())
        .collect()
}

/// Direction of a k-space phase application.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhaseSign {
    /// Multiply by `exp(+iφ)`: the defocus model.
    Corrupt,
    /// Multiply by `exp(−iφ)`: the autofocus correction.
    Correct,
}

impl PhaseSign {
    pub fn factor(self) -> f64 {
        match self {
            PhaseSign::Corrupt => 1.0,
            PhaseSign::Correct => -1.0,
        }
    }
}

/// Multiplies every range column of the spectrum by `exp(i·sign·φ[n])`.
pub fn apply_phase(
    spectrum: &ApertureSpectrum,
    phi: &[f64],
    sign: PhaseSign,
) -> Result<ApertureSpectrum> {
    let size = spectrum.size();
    if phi.len() != size {
        return Err(Error::Shape {
            expected: format!("{size} phase samples"),
            actual: format!("{}", phi.len()),
        });
    }
    let s = sign.factor();
    let mut data = spectrum.as_slice().to_vec();
    for (row, &p) in data.chunks_exact_mut(size).zip(phi) {
        let rot = Complex64::from_polar(1.0, s * p);
        for v in row {
            *v *= rot;
        }
    }
    Ok(ApertureSpectrum::from_vec_unchecked(size, data))
}
