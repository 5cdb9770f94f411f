use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

use super::{ApertureSpectrum, SlcImage};
use crate::error::{Error, Result};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, direction: FftDirection) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft(len, direction))
}

fn check_size(size: usize) -> Result<()> {
    if size < 8 || !size.is_power_of_two() {
        return Err(Error::Size(format!(
            "along-track transform needs a power-of-two size >= 8, got {size}"
        )));
    }
    Ok(())
}

/// Transforms every range column along the first axis, unitary scaling.
fn transform_columns(size: usize, data: &[Complex64], direction: FftDirection) -> Vec<Complex64> {
    // Gather columns into contiguous rows so one batched call covers the image.
    let mut cols = vec![Complex64::new(0.0, 0.0); size * size];
    for r in 0..size {
        let row = &data[r * size..(r + 1) * size];
        for (c, &v) in row.iter().enumerate() {
            cols[c * size + r] = v;
        }
    }
    let fft = plan(size, direction);
    fft.process(&mut cols);

    let scale = 1.0 / (size as f64).sqrt();
    let mut out = vec![Complex64::new(0.0, 0.0); size * size];
    for c in 0..size {
        let col = &cols[c * size..(c + 1) * size];
        for (r, &v) in col.iter().enumerate() {
            out[r * size + c] = v * scale;
        }
    }
    out
}

/// Unitary 1-D DFT of each range column over the along-track axis.
pub fn fft_along_track(g: &SlcImage) -> Result<ApertureSpectrum> {
    check_size(g.size())?;
    let data = transform_columns(g.size(), g.as_slice(), FftDirection::Forward);
    Ok(ApertureSpectrum::from_vec_unchecked(g.size(), data))
}

/// Exact inverse of [`fft_along_track`].
pub fn ifft_along_track(spectrum: &ApertureSpectrum) -> Result<SlcImage> {
    check_size(spectrum.size())?;
    let data = transform_columns(spectrum.size(), spectrum.as_slice(), FftDirection::Inverse);
    Ok(SlcImage::from_vec_unchecked(spectrum.size(), data))
}

/// Adjoint of the inverse transform, acting on an image-domain cotangent.
/// The inverse transform is unitary, so its adjoint is the forward transform.
pub(crate) fn adjoint_of_inverse(size: usize, cotangent: &[Complex64]) -> Vec<Complex64> {
    transform_columns(size, cotangent, FftDirection::Forward)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_image(size: usize, seed: u64) -> SlcImage {
        let mut rng = Rng::new(seed);
        let data = (0..size * size)
            .map(|_| c(rng.gaussian(), rng.gaussian()))
            .collect();
        SlcImage::from_vec(size, data).unwrap()
    }

    #[test]
    fn constant_column_maps_to_dc() {
        let g = SlcImage::from_vec(8, vec![c(1.0, 0.0); 64]).unwrap();
        let spec = fft_along_track(&g).unwrap();
        for col in 0..8 {
            assert!((spec.get(0, col) - c(8f64.sqrt(), 0.0)).norm() < 1e-12);
            for row in 1..8 {
                assert!(spec.get(row, col).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn impulse_has_flat_spectrum() {
        let mut data = vec![c(0.0, 0.0); 64];
        data[3] = c(1.0, 0.0); // row 0, column 3
        let spec = fft_along_track(&SlcImage::from_vec(8, data).unwrap()).unwrap();
        for row in 0..8 {
            assert!((spec.get(row, 3).norm() - 1.0 / 8f64.sqrt()).abs() < 1e-12);
            assert_eq!(spec.get(row, 2), c(0.0, 0.0));
        }
    }

    #[test]
    fn round_trip_and_parseval() {
        let g = random_image(32, 7);
        let spec = fft_along_track(&g).unwrap();
        let back = ifft_along_track(&spec).unwrap();
        assert!(back.relative_l2(&g) < 1e-10);
        assert!((spec.energy() - g.energy()).abs() / g.energy() < 1e-9);
    }

    #[test]
    fn zero_spectrum_gives_zero_image() {
        let g = ifft_along_track(&ApertureSpectrum::zeros(16)).unwrap();
        assert!(g.as_slice().iter().all(|z| *z == c(0.0, 0.0)));
    }

    #[test]
    fn inverse_is_linear() {
        let a = fft_along_track(&random_image(16, 1)).unwrap();
        let b = fft_along_track(&random_image(16, 2)).unwrap();
        let (x, y) = (c(0.3, -1.2), c(-2.0, 0.5));
        let combo: Vec<_> = a
            .as_slice()
            .iter()
            .zip(b.as_slice())
            .map(|(p, q)| x * p + y * q)
            .collect();
        let lhs = ifft_along_track(&ApertureSpectrum::from_vec(16, combo).unwrap()).unwrap();
        let ia = ifft_along_track(&a).unwrap();
        let ib = ifft_along_track(&b).unwrap();
        let rhs: Vec<_> = ia
            .as_slice()
            .iter()
            .zip(ib.as_slice())
            .map(|(p, q)| x * p + y * q)
            .collect();
        let rhs = SlcImage::from_vec(16, rhs).unwrap();
        assert!(lhs.relative_l2(&rhs) < 1e-10);
    }

    #[test]
    fn rejects_unsupported_sizes() {
        let g = SlcImage::from_vec(12, vec![c(1.0, 0.0); 144]).unwrap();
        assert!(matches!(fft_along_track(&g), Err(Error::Size(_))));
        let g = SlcImage::from_vec(4, vec![c(1.0, 0.0); 16]).unwrap();
        assert!(matches!(fft_along_track(&g), Err(Error::Size(_))));
        assert!(matches!(
            ifft_along_track(&ApertureSpectrum::zeros(6)),
            Err(Error::Size(_))
        ));
    }
}
