//! Single-look-complex images and the k-space machinery shared by every
//! autofocus path: along-track transforms, polynomial phase models, dynamic
//! range compression and the SLC1 container.
//!
//! Layout convention: the first image dimension is along-track (rows), the
//! second is range (columns). Data are row-major.

mod drc;
pub(crate) mod fft;
pub mod io;
pub(crate) mod phase;

pub use drc::{drc, phase_map, DrcOperator};
pub use fft::{fft_along_track, ifft_along_track};
pub use phase::{
    aperture_grid, apply_phase, eval_phase, PhasePolynomial, PhaseSign, MAX_DEGREE, MIN_DEGREE,
    NUM_COEFFS,
};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Square complex image, `size × size`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SlcImage {
    size: usize,
    data: Vec<Complex64>,
}

/// Along-track spectrum of an [`SlcImage`]. Same layout; row `n` is spatial
/// frequency bin `n` in FFT order.
#[derive(Clone, Debug, PartialEq)]
pub struct ApertureSpectrum {
    size: usize,
    data: Vec<Complex64>,
}

fn check_square(len: usize, size: usize) -> Result<()> {
    if size == 0 {
        return Err(Error::Size("image must have at least one pixel".into()));
    }
    if size.checked_mul(size) != Some(len) {
        return Err(Error::Shape {
            expected: format!("{size}x{size} = {} values", size.saturating_mul(size)),
            actual: format!("{len} values"),
        });
    }
    Ok(())
}

macro_rules! complex_grid {
    ($ty:ident) => {
        impl $ty {
            /// Wraps row-major data. Rejects non-square shapes and non-finite values.
            pub fn from_vec(size: usize, data: Vec<Complex64>) -> Result<Self> {
                check_square(data.len(), size)?;
                if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                    return Err(Error::NonFinite(stringify!($ty)));
                }
                Ok(Self { size, data })
            }

            pub(crate) fn from_vec_unchecked(size: usize, data: Vec<Complex64>) -> Self {
                debug_assert_eq!(data.len(), size * size);
                Self { size, data }
            }

            pub fn zeros(size: usize) -> Self {
                Self {
                    size,
                    data: vec![Complex64::new(0.0, 0.0); size * size],
                }
            }

            pub fn size(&self) -> usize {
                self.size
            }

            pub fn rows(&self) -> usize {
                self.size
            }

            pub fn cols(&self) -> usize {
                self.size
            }

            pub fn get(&self, row: usize, col: usize) -> Complex64 {
                self.data[row * self.size + col]
            }

            pub fn as_slice(&self) -> &[Complex64] {
                &self.data
            }

            pub fn into_vec(self) -> Vec<Complex64> {
                self.data
            }

            /// Sum of squared magnitudes.
            pub fn energy(&self) -> f64 {
                self.data.iter().map(|z| z.norm_sqr()).sum()
            }
        }
    };
}

complex_grid!(SlcImage);
complex_grid!(ApertureSpectrum);

impl SlcImage {
    pub fn magnitudes(&self) -> Vec<f64> {
        self.data.iter().map(|z| z.norm()).collect()
    }

    pub fn magnitude_image(&self) -> RealImage {
        RealImage {
            size: self.size,
            data: self.magnitudes(),
        }
    }

    /// Relative L2 distance `‖self − other‖ / ‖other‖`.
    pub fn relative_l2(&self, other: &SlcImage) -> f64 {
        let num: f64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        let den = other.energy();
        if den == 0.0 {
            num.sqrt()
        } else {
            (num / den).sqrt()
        }
    }
}

/// Square real-valued image (magnitudes, DRC output, phase maps, weights).
#[derive(Clone, Debug, PartialEq)]
pub struct RealImage {
    size: usize,
    data: Vec<f64>,
}

impl RealImage {
    pub fn from_vec(size: usize, data: Vec<f64>) -> Result<Self> {
        check_square(data.len(), size)?;
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("RealImage"));
        }
        Ok(Self { size, data })
    }

    pub(crate) fn from_vec_unchecked(size: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), size * size);
        Self { size, data }
    }

    pub fn filled(size: usize, value: f64) -> Self {
        Self {
            size,
            data: vec![value; size * size],
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.size + col]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        self.data.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / self.data.len() as f64
    }
}

/// Applies the estimated phase correction `exp(−iφ)` in k-space and returns
/// the corrected image.
pub fn correct(g_e: &SlcImage, p: &PhasePolynomial) -> Result<SlcImage> {
    let spectrum = fft_along_track(g_e)?;
    correct_spectrum(&spectrum, p)
}

/// Correction starting from an already transformed image.
pub fn correct_spectrum(spectrum: &ApertureSpectrum, p: &PhasePolynomial) -> Result<SlcImage> {
    let phi = eval_phase(p, spectrum.size());
    let shifted = apply_phase(spectrum, &phi, PhaseSign::Correct)?;
    ifft_along_track(&shifted)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_square_and_non_finite() {
        let z = Complex64::new(1.0, 0.0);
        assert!(matches!(
            SlcImage::from_vec(3, vec![z; 8]),
            Err(Error::Shape { .. })
        ));
        let mut data = vec![z; 4];
        data[2].im = f64::NAN;
        assert!(matches!(
            SlcImage::from_vec(2, data),
            Err(Error::NonFinite(_))
        ));
        assert!(RealImage::from_vec(2, vec![0.0, 1.0, f64::INFINITY, 0.0]).is_err());
    }

    #[test]
    fn relative_l2_of_identical_is_zero() {
        let g = SlcImage::from_vec(2, vec![Complex64::new(1.0, -2.0); 4]).unwrap();
        assert_eq!(g.relative_l2(&g), 0.0);
    }
}
