//! Autofocus for synthetic aperture sonar single-look-complex imagery.
//!
//! Two correction paths share one k-space model: a phase polynomial over
//! the along-track aperture is removed by multiplying the along-track
//! spectrum by `exp(−iφ)`.
//!
//! * [`gd`] estimates the polynomial per image by gradient descent on a
//!   sharpness metric from [`metrics`].
//! * [`learned`] regresses the polynomial in one forward pass of a small
//!   convolutional network trained on relative sharpness improvement.
//!
//! [`synth`] builds deterministic synthetic scenes and corrupted datasets,
//! and [`iqa`] scores corrections against ground truth.

pub mod error;
pub mod gd;
pub mod iqa;
pub mod learned;
pub mod metrics;
pub mod slc;
pub mod synth;

pub use error::{Error, Result};
pub use metrics::MetricKind;
pub use slc::{ApertureSpectrum, PhasePolynomial, RealImage, SlcImage};
