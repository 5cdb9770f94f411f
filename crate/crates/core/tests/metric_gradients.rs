use num_complex::Complex64;
use proptest::prelude::*;
use sas_autofocus::gd::WeightFn;
use sas_autofocus::metrics::{sharpness_grad, SharpnessObjective};
use sas_autofocus::slc::fft_along_track;
use sas_autofocus::synth::Rng;
use sas_autofocus::{MetricKind, PhasePolynomial, SlcImage};

fn random_image(size: usize, seed: u64) -> SlcImage {
    let mut rng = Rng::new(seed);
    let data = (0..size * size)
        .map(|_| Complex64::new(rng.gaussian(), rng.gaussian()))
        .collect();
    SlcImage::from_vec(size, data).unwrap()
}

fn random_poly(seed: u64, scale: f64) -> PhasePolynomial {
    let mut rng = Rng::new(seed);
    let mut c = [0.0; 9];
    for v in &mut c {
        *v = rng.uniform_range(-scale, scale);
    }
    PhasePolynomial::new(c)
}

fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den
}

/// Central differences of the objective value in each coefficient.
fn fd_gradient(obj: &SharpnessObjective, p: &PhasePolynomial, h: f64) -> Vec<f64> {
    (0..9)
        .map(|d| {
            let mut up = *p;
            up.coeffs_mut()[d] += h;
            let mut dn = *p;
            dn.coeffs_mut()[d] -= h;
            (obj.value(&up).unwrap() - obj.value(&dn).unwrap()) / (2.0 * h)
        })
        .collect()
}

#[test]
fn analytic_matches_finite_difference_for_every_metric() {
    for size in [8, 16, 32] {
        let fixtures = if size == 16 { 20 } else { 5 };
        for seed in 0..fixtures {
            let g = random_image(size, 1000 * size as u64 + seed);
            let spectrum = fft_along_track(&g).unwrap();
            let p = random_poly(seed, 0.5);
            for kind in MetricKind::ALL {
                let obj = SharpnessObjective::new(kind, &spectrum, None).unwrap();
                let analytic = obj.value_and_grad(&p).unwrap();
                assert_eq!(analytic.objective, obj.value(&p).unwrap());
                let fd = fd_gradient(&obj, &p, 1e-5);
                let r = rel_l2(&analytic.d_coeffs, &fd);
                assert!(r < 1e-4, "{kind} M={size} seed={seed}: {r:e}");
            }
        }
    }
}

#[test]
fn weighted_objective_gradient_matches() {
    let g = random_image(16, 5);
    let weights = WeightFn::low_contrast(5, 0.25)
        .unwrap()
        .weight_image(&g.magnitude_image())
        .unwrap();
    let spectrum = fft_along_track(&g).unwrap();
    let p = random_poly(9, 0.3);
    for kind in MetricKind::ALL {
        let obj = SharpnessObjective::new(kind, &spectrum, Some(weights.as_slice())).unwrap();
        let analytic = obj.value_and_grad(&p).unwrap();
        let r = rel_l2(&analytic.d_coeffs, &fd_gradient(&obj, &p, 1e-5));
        assert!(r < 1e-4, "{kind}: {r:e}");
    }
}

#[test]
fn gradient_is_zero_for_a_single_impulse_at_zero_phase() {
    // A centred impulse stays an impulse at φ = 0, where MNS is maximal.
    let mut data = vec![Complex64::new(0.0, 0.0); 64];
    data[0] = Complex64::new(1.0, 0.0);
    let g = SlcImage::from_vec(8, data).unwrap();
    let s = fft_along_track(&g).unwrap();
    let grad = sharpness_grad(MetricKind::Ssi, &s, &PhasePolynomial::zero(), None).unwrap();
    assert!(grad.d_coeffs.iter().all(|v| v.abs() < 1e-12), "{:?}", grad.d_coeffs);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn gradient_scales_with_image_for_ssi(seed in 0u64..1000, a in 0.5f64..3.0) {
        // SSI is homogeneous of degree 4 in the image.
        let g = random_image(8, seed);
        let scaled = SlcImage::from_vec(8, g.as_slice().iter().map(|z| z * a).collect()).unwrap();
        let p = random_poly(seed, 0.4);
        let g1 = sharpness_grad(MetricKind::Ssi, &fft_along_track(&g).unwrap(), &p, None).unwrap();
        let g2 = sharpness_grad(MetricKind::Ssi, &fft_along_track(&scaled).unwrap(), &p, None).unwrap();
        let expected: Vec<f64> = g1.d_coeffs.iter().map(|v| v * a.powi(4)).collect();
        prop_assert!(rel_l2(&g2.d_coeffs, &expected) < 1e-10);
    }
}
