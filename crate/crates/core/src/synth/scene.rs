use std::f64::consts::PI;

use num_complex::Complex64;

use super::rng::{derive_seed, Rng};
use crate::error::{Error, Result};
use crate::slc::SlcImage;

/// Amplitude modulation applied on top of the speckle field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Texture {
    Flat,
    /// Sinusoidal sand ripples. `depth` is the fractional amplitude dip in the troughs.
    Ripple {
        wavelength_px: f64,
        depth: f64,
        orientation_rad: f64,
    },
    /// A dark acoustic shadow covering `fraction` of the range extent at far range.
    Shadow { fraction: f64 },
}

/// Residual amplitude inside a shadow.
const SHADOW_FLOOR: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SceneSpec {
    pub size: usize,
    pub seed: u64,
    pub scatterer_count: usize,
    pub scatterer_snr_db: f64,
    pub texture: Texture,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.size < 8 || !self.size.is_power_of_two() {
            return Err(Error::Size(format!(
                "scene size must be a power of two >= 8, got {}",
                self.size
            )));
        }
        if !self.scatterer_snr_db.is_finite() {
            return Err(Error::InvalidParameter("scatterer SNR must be finite".into()));
        }
        match self.texture {
            Texture::Flat => {}
            Texture::Ripple {
                wavelength_px,
                depth,
                orientation_rad,
            } => {
                if !(wavelength_px > 0.0) || !orientation_rad.is_finite() {
                    return Err(Error::InvalidParameter("ripple wavelength must be positive".into()));
                }
                if !(0.0..=1.0).contains(&depth) {
                    return Err(Error::InvalidParameter(format!("ripple depth {depth} not in [0, 1]")));
                }
            }
            Texture::Shadow { fraction } => {
                if !(fraction > 0.0 && fraction < 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "shadow fraction {fraction} not in (0, 1)"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Scene parameters drawn from `seed`: one of the three textures,
    /// 4–16 scatterers at 18–32 dB.
    pub fn random(size: usize, seed: u64) -> Self {
        let mut rng = Rng::new(seed);
        let texture = match rng.uniform_int(0, 2) {
            0 => Texture::Flat,
            1 => Texture::Ripple {
                wavelength_px: rng.uniform_range(6.0, 24.0),
                depth: rng.uniform_range(0.3, 0.9),
                orientation_rad: rng.uniform_range(0.0, PI),
            },
            _ => Texture::Shadow {
                fraction: rng.uniform_range(0.2, 0.5),
            },
        };
        Self {
            size,
            seed: derive_seed(seed, 0, 1),
            scatterer_count: rng.uniform_int(4, 16) as usize,
            scatterer_snr_db: rng.uniform_range(18.0, 32.0),
            texture,
        }
    }

    fn amplitude(&self, row: usize, col: usize) -> f64 {
        let m = self.size as f64;
        match self.texture {
            Texture::Flat => 1.0,
            Texture::Ripple {
                wavelength_px,
                depth,
                orientation_rad,
            } => {
                let x = row as f64 * orientation_rad.cos() + col as f64 * orientation_rad.sin();
                let s = (2.0 * PI * x / wavelength_px).sin();
                1.0 - depth * (1.0 - s) / 2.0
            }
            Texture::Shadow { fraction } => {
                let in_rows = (row as f64) >= m / 4.0 && (row as f64) < 3.0 * m / 4.0;
                let in_cols = (col as f64) >= (1.0 - fraction) * m;
                if in_rows && in_cols {
                    SHADOW_FLOOR
                } else {
                    1.0
                }
            }
        }
    }
}

/// Fully developed speckle (circular complex Gaussian, unit mean intensity)
/// shaped by the texture, plus isolated point scatterers whose amplitude is
/// `scatterer_snr_db` above the mean background amplitude.
pub fn gen_scene(spec: &SceneSpec) -> Result<SlcImage> {
    spec.validate()?;
    let m = spec.size;
    let mut rng = Rng::new(spec.seed);
    let sigma = std::f64::consts::FRAC_1_SQRT_2;
    let mut data = Vec::with_capacity(m * m);
    for row in 0..m {
        for col in 0..m {
            let z = Complex64::new(sigma * rng.gaussian(), sigma * rng.gaussian());
            data.push(z * spec.amplitude(row, col));
        }
    }
    let background = data.iter().map(|z| z.norm()).sum::<f64>() / (m * m) as f64;
    let amplitude = background * 10f64.powf(spec.scatterer_snr_db / 20.0);
    for _ in 0..spec.scatterer_count {
        let row = rng.uniform_int(0, m as u64 - 1) as usize;
        let col = rng.uniform_int(0, m as u64 - 1) as usize;
        let phase = rng.uniform_range(-PI, PI);
        data[row * m + col] += Complex64::from_polar(amplitude, phase);
    }
    SlcImage::from_vec(m, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(size: usize, seed: u64, count: usize, snr: f64) -> SceneSpec {
        SceneSpec {
            size,
            seed,
            scatterer_count: count,
            scatterer_snr_db: snr,
            texture: Texture::Flat,
        }
    }

    #[test]
    fn deterministic_in_seed() {
        let spec = SceneSpec::random(32, 99);
        assert_eq!(gen_scene(&spec).unwrap(), gen_scene(&spec).unwrap());
        assert_ne!(
            gen_scene(&spec).unwrap(),
            gen_scene(&SceneSpec::random(32, 100)).unwrap()
        );
    }

    #[test]
    fn flat_speckle_has_unit_mean_intensity() {
        let g = gen_scene(&flat(256, 5, 0, 0.0)).unwrap();
        let mean_intensity = g.energy() / (256.0 * 256.0);
        assert!((mean_intensity - 1.0).abs() < 0.05, "{mean_intensity}");
    }

    #[test]
    fn scatterer_stands_out_by_snr() {
        let g = gen_scene(&flat(64, 6, 1, 30.0)).unwrap();
        let mags = g.magnitudes();
        let brightest = mags.iter().copied().fold(0.0, f64::max);
        let mut sorted = mags.clone();
        sorted.sort_by(f64::total_cmp);
        let background: f64 = sorted[..sorted.len() - 1].iter().sum::<f64>() / (sorted.len() - 1) as f64;
        assert!(brightest >= 10.0 * background);
        assert!(20.0 * (brightest / background).log10() > 27.0);
    }

    #[test]
    fn texture_validation() {
        let mut s = flat(32, 1, 0, 0.0);
        s.texture = Texture::Ripple {
            wavelength_px: 8.0,
            depth: 1.5,
            orientation_rad: 0.0,
        };
        assert!(s.validate().is_err());
        s.texture = Texture::Shadow { fraction: 1.0 };
        assert!(s.validate().is_err());
        s.texture = Texture::Shadow { fraction: 0.3 };
        assert!(s.validate().is_ok());
        s.size = 48;
        assert!(matches!(s.validate(), Err(Error::Size(_))));
    }

    #[test]
    fn shadow_darkens_far_range() {
        let mut s = flat(64, 2, 0, 0.0);
        s.texture = Texture::Shadow { fraction: 0.5 };
        let g = gen_scene(&s).unwrap();
        let mean_in = |rows: std::ops::Range<usize>, cols: std::ops::Range<usize>| {
            let mut acc = 0.0;
            let mut n = 0.0;
            for r in rows {
                for c in cols.clone() {
                    acc += g.get(r, c).norm_sqr();
                    n += 1.0;
                }
            }
            acc / n
        };
        assert!(mean_in(16..48, 32..64) < 0.1 * mean_in(16..48, 0..32));
    }
}
