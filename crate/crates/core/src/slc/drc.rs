use std::f64::consts::PI;

use super::{RealImage, SlcImage};
use crate::error::{Error, Result};

/// Output level the median magnitude is pinned to.
const MEDIAN_TARGET: f64 = 0.2;

/// Rational tone-mapping operator fitted to one image.
///
/// Magnitudes are first divided by the image maximum; the median of the
/// normalized magnitudes `m` then fixes `q` so that `m ↦ 0.2` and `1 ↦ 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DrcOperator {
    max: f64,
    median: f64,
    q: f64,
}

impl DrcOperator {
    pub fn fit(magnitudes: &[f64]) -> Result<Self> {
        let max = magnitudes.iter().copied().fold(0.0, f64::max);
        if max <= 0.0 {
            return Err(Error::Degenerate("all-zero image has no dynamic range"));
        }
        let median = median(magnitudes) / max;
        if median <= 0.0 || median >= 1.0 {
            return Err(Error::Degenerate("normalized median must lie strictly in (0, 1)"));
        }
        let q = (MEDIAN_TARGET - MEDIAN_TARGET * median) / (median - MEDIAN_TARGET * median);
        Ok(Self { max, median, q })
    }

    /// Median of the max-normalized magnitudes.
    pub fn median(&self) -> f64 {
        self.median
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// Maps a raw (un-normalized) magnitude into `[0, 1]`.
    pub fn apply(&self, magnitude: f64) -> f64 {
        let x = (magnitude / self.max).min(1.0);
        self.q * x / ((self.q - 1.0) * x + 1.0)
    }
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    let n = v.len();
    let mid = n / 2;
    let (_, upper, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if n % 2 == 1 {
        upper
    } else {
        let lower = v[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

/// Dynamic range compression of the image magnitude into `[0, 1]`.
pub fn drc(g: &SlcImage) -> Result<RealImage> {
    let mags = g.magnitudes();
    let op = DrcOperator::fit(&mags)?;
    let data = mags.into_iter().map(|m| op.apply(m)).collect();
    Ok(RealImage::from_vec_unchecked(g.size(), data))
}

/// Element-wise `arg(g)/π` in `[−1, 1)`; `arg(0) = 0` and the `−π` branch is kept.
pub fn phase_map(g: &SlcImage) -> RealImage {
    let data = g
        .as_slice()
        .iter()
        .map(|z| {
            if z.re == 0.0 && z.im == 0.0 {
                return 0.0;
            }
            let a = z.im.atan2(z.re);
            if a >= PI {
                -1.0
            } else {
                a / PI
            }
        })
        .collect();
    RealImage::from_vec_unchecked(g.size(), data)
}
