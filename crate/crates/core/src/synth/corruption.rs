use super::rng::Rng;
use crate::error::Result;
use crate::slc::{
    apply_phase, eval_phase, fft_along_track, ifft_along_track, PhasePolynomial, PhaseSign,
    SlcImage, MAX_DEGREE, MIN_DEGREE, NUM_COEFFS,
};

/// Largest absolute phase excursion a sampled corruption may reach.
pub const MAX_SCALE_RAD: f64 = 18.0;

/// A sampled low-frequency phase error.
#[derive(Clone, Debug, PartialEq)]
pub struct CorruptionSpec {
    /// Polynomial order, in `2..=10`.
    pub order: usize,
    /// Raw uniform draws for degrees `2..=order`.
    pub raw_coeffs: Vec<f64>,
    /// Peak phase excursion in radians, in `[−18, 18]`.
    pub scale: f64,
    /// Normalized and scaled polynomial; degrees above `order` are zero.
    pub realized: PhasePolynomial,
}

/// Draws order, raw coefficients and scale, then normalizes the polynomial
/// on the `m`-point aperture grid so that `max |φ| = |scale|`.
pub fn sample_corruption(m: usize, seed: u64) -> CorruptionSpec {
    let mut rng = Rng::new(seed);
    let order = rng.uniform_int(MIN_DEGREE as u64, MAX_DEGREE as u64) as usize;
    loop {
        let raw_coeffs: Vec<f64> = (MIN_DEGREE..=order)
            .map(|_| rng.uniform_range(-1.0, 1.0))
            .collect();
        let mut raw = [0.0; NUM_COEFFS];
        raw[..raw_coeffs.len()].copy_from_slice(&raw_coeffs);
        let peak = eval_phase(&PhasePolynomial::new(raw), m)
            .into_iter()
            .fold(0.0, |acc: f64, v| acc.max(v.abs()));
        if peak == 0.0 {
            continue;
        }
        let scale = rng.uniform_range(-MAX_SCALE_RAD, MAX_SCALE_RAD);
        let realized = PhasePolynomial::new(raw.map(|c| c / peak * scale));
        return CorruptionSpec {
            order,
            raw_coeffs,
            scale,
            realized,
        };
    }
}

/// Defocus model: `F⁻¹{exp(iφ) ⊙ F{g}}`.
pub fn corrupt(g: &SlcImage, p: &PhasePolynomial) -> Result<SlcImage> {
    let spectrum = fft_along_track(g)?;
    let phi = eval_phase(p, g.size());
    ifft_along_track(&apply_phase(&spectrum, &phi, PhaseSign::Corrupt)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::mns;
    use crate::slc::correct;
    use crate::synth::{gen_scene, SceneSpec};

    #[test]
    fn peak_phase_equals_scale() {
        for seed in 0..200 {
            let c = sample_corruption(256, seed);
            let peak = eval_phase(&c.realized, 256)
                .into_iter()
                .fold(0.0, |acc: f64, v| acc.max(v.abs()));
            assert!((peak - c.scale.abs()).abs() < 1e-9);
            assert_eq!(c.raw_coeffs.len(), c.order - 1);
            for d in c.order + 1..=MAX_DEGREE {
                assert_eq!(c.realized.coeff(d), 0.0);
            }
            assert!(c.raw_coeffs.iter().all(|r| (-1.0..=1.0).contains(r)));
        }
    }

    #[test]
    fn corrupt_round_trip_and_energy() {
        let g = gen_scene(&SceneSpec::random(32, 4)).unwrap();
        assert!(corrupt(&g, &PhasePolynomial::zero()).unwrap().relative_l2(&g) < 1e-12);
        let c = sample_corruption(32, 8);
        let bad = corrupt(&g, &c.realized).unwrap();
        assert!((bad.energy() - g.energy()).abs() / g.energy() < 1e-9);
        assert!(correct(&bad, &c.realized).unwrap().relative_l2(&g) < 1e-10);
        assert!((mns(&bad.magnitudes()).unwrap() - mns(&g.magnitudes()).unwrap()).abs() > 1e-6);
    }
}
