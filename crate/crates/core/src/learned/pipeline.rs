//! End-to-end differentiable correction: regressor, k-space correction and
//! the relative-sharpness loss.

use super::net::{backward, forward_cached, stack_input, FeatureMap, RegressorParams};
use crate::error::{Error, Result};
use crate::gd::FocusResult;
use crate::metrics::{mns, MetricKind, SharpnessObjective};
use crate::slc::{
    correct_spectrum, drc, fft_along_track, phase_map, ApertureSpectrum, PhasePolynomial, SlcImage,
};

/// `−(after − before) / before`: negative when the output is sharper.
pub fn relative_sharpness_loss(before: f64, after: f64) -> Result<f64> {
    if before == 0.0 {
        return Err(Error::UndefinedMetric("relative sharpness of a zero-MNS input"));
    }
    Ok(-(after - before) / before)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineOutput {
    pub g_hat: SlcImage,
    pub phi_hat: PhasePolynomial,
    /// MNS of the input magnitude.
    pub sharpness_before: f64,
    /// MNS of the corrected magnitude.
    pub sharpness_after: f64,
    pub loss: f64,
}

/// Everything about a defocused input that does not depend on the
/// parameters: network input channels, spectrum and input sharpness.
#[derive(Clone, Debug)]
pub struct PreparedInput {
    input: FeatureMap,
    g_e: SlcImage,
    spectrum: ApertureSpectrum,
    before: f64,
}

impl PreparedInput {
    pub fn new(g_e: &SlcImage) -> Result<Self> {
        let before = mns(&g_e.magnitudes())?;
        if before == 0.0 {
            return Err(Error::UndefinedMetric("relative sharpness of a zero-MNS input"));
        }
        Ok(Self {
            input: stack_input(&drc(g_e)?, &phase_map(g_e))?,
            g_e: g_e.clone(),
            spectrum: fft_along_track(g_e)?,
            before,
        })
    }

    pub fn sharpness_before(&self) -> f64 {
        self.before
    }

    /// One forward pass. A prediction of exactly zero leaves the image untouched.
    pub fn forward(&self, params: &RegressorParams) -> Result<PipelineOutput> {
        let cache = forward_cached(params, self.input.clone())?;
        let phi_hat = PhasePolynomial::new(cache.coeffs);
        let (g_hat, after) = if phi_hat == PhasePolynomial::zero() {
            (self.g_e.clone(), self.before)
        } else {
            let g_hat = correct_spectrum(&self.spectrum, &phi_hat)?;
            let after = mns(&g_hat.magnitudes())?;
            (g_hat, after)
        };
        Ok(PipelineOutput {
            g_hat,
            phi_hat,
            sharpness_before: self.before,
            sharpness_after: after,
            loss: relative_sharpness_loss(self.before, after)?,
        })
    }

    /// Loss only, without materializing the output image twice.
    pub fn loss(&self, params: &RegressorParams) -> Result<f64> {
        Ok(self.forward(params)?.loss)
    }

    /// Loss and its exact gradient with respect to every parameter.
    pub fn backward(&self, params: &RegressorParams) -> Result<(f64, RegressorParams)> {
        let cache = forward_cached(params, self.input.clone())?;
        let objective = SharpnessObjective::new(MetricKind::Mns, &self.spectrum, None)?;
        let step = objective.value_and_grad(&PhasePolynomial::new(cache.coeffs))?;
        let loss = relative_sharpness_loss(self.before, -step.objective)?;
        let d_coeffs = step.d_coeffs.map(|d| d / self.before);
        Ok((loss, backward(params, &cache, &d_coeffs)))
    }
}

pub fn pipeline_forward(g_e: &SlcImage, params: &RegressorParams) -> Result<PipelineOutput> {
    PreparedInput::new(g_e)?.forward(params)
}

/// Loss and its gradient with respect to every parameter. The DRC and
/// phase-map inputs are treated as data.
pub fn pipeline_backward(g_e: &SlcImage, params: &RegressorParams) -> Result<(f64, RegressorParams)> {
    PreparedInput::new(g_e)?.backward(params)
}

/// Single-pass correction. The trace holds the one pipeline loss; the
/// starting objective is the zero-correction loss, 0.
pub fn infer(g_e: &SlcImage, params: &RegressorParams) -> Result<FocusResult> {
    let out = pipeline_forward(g_e, params)?;
    Ok(FocusResult {
        g_hat: out.g_hat,
        phi_hat: out.phi_hat,
        trace: vec![out.loss],
        coeff_trace: vec![out.phi_hat],
        initial_objective: 0.0,
    })
}
