//! Compact convolutional regressor with a hand-written reverse pass.
//!
//! Four 3×3 stride-2 convolutions (zero padding 1) take the stacked
//! `(drc, phase)` input from 2 to 64 channels, each followed by a leaky
//! ReLU. Global average pooling reduces the last map to a 64-vector, and a
//! 64→32→9 MLP produces the phase coefficients for degrees 2..=10.

use crate::error::{Error, Result};
use crate::slc::{PhasePolynomial, RealImage, NUM_COEFFS};
use crate::synth::Rng;

/// Channel widths through the convolution stack.
pub const CONV_CHANNELS: [usize; 5] = [2, 8, 16, 32, 64];
pub const HIDDEN_UNITS: usize = 32;
pub const LEAKY_SLOPE: f64 = 0.1;
/// Smallest accepted input side.
pub const MIN_INPUT_SIZE: usize = 16;

const K: usize = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct Conv2d {
    pub in_channels: usize,
    pub out_channels: usize,
    /// `[out][in][3][3]`, row-major.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub in_dim: usize,
    pub out_dim: usize,
    /// `[out][in]`, row-major.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Conv2d {
    fn zeros(in_channels: usize, out_channels: usize) -> Self {
        Self {
            in_channels,
            out_channels,
            weight: vec![0.0; out_channels * in_channels * K * K],
            bias: vec![0.0; out_channels],
        }
    }
}

impl Dense {
    fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            weight: vec![0.0; out_dim * in_dim],
            bias: vec![0.0; out_dim],
        }
    }
}

/// Named view of one parameter tensor.
pub struct Tensor<'a> {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: &'a [f64],
}

/// All learnable weights and biases of the regressor.
#[derive(Clone, Debug, PartialEq)]
pub struct RegressorParams {
    pub convs: [Conv2d; 4],
    pub fc1: Dense,
    pub fc2: Dense,
}

impl RegressorParams {
    pub fn zeros() -> Self {
        let c = CONV_CHANNELS;
        Self {
            convs: [
                Conv2d::zeros(c[0], c[1]),
                Conv2d::zeros(c[1], c[2]),
                Conv2d::zeros(c[2], c[3]),
                Conv2d::zeros(c[3], c[4]),
            ],
            fc1: Dense::zeros(c[4], HIDDEN_UNITS),
            fc2: Dense::zeros(HIDDEN_UNITS, NUM_COEFFS),
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init(seed: u64) -> Self {
        let mut p = Self::zeros();
        let mut rng = Rng::new(seed);
        let mut fill = |w: &mut [f64], fan_in: usize, fan_out: usize| {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for v in w {
                *v = rng.uniform_range(-limit, limit);
            }
        };
        for conv in &mut p.convs {
            fill(&mut conv.weight, conv.in_channels * K * K, conv.out_channels * K * K);
        }
        fill(&mut p.fc1.weight, p.fc1.in_dim, p.fc1.out_dim);
        fill(&mut p.fc2.weight, p.fc2.in_dim, p.fc2.out_dim);
        p
    }

    /// Tensors in checkpoint order.
    pub fn tensors(&self) -> Vec<Tensor<'_>> {
        let mut out = Vec::with_capacity(12);
        for (i, conv) in self.convs.iter().enumerate() {
            out.push(Tensor {
                name: format!("conv{}.weight", i + 1),
                dims: vec![conv.out_channels, conv.in_channels, K, K],
                data: &conv.weight,
            });
            out.push(Tensor {
                name: format!("conv{}.bias", i + 1),
                dims: vec![conv.out_channels],
                data: &conv.bias,
            });
        }
        for (name, d) in [("fc1", &self.fc1), ("fc2", &self.fc2)] {
            out.push(Tensor {
                name: format!("{name}.weight"),
                dims: vec![d.out_dim, d.in_dim],
                data: &d.weight,
            });
            out.push(Tensor {
                name: format!("{name}.bias"),
                dims: vec![d.out_dim],
                data: &d.bias,
            });
        }
        out
    }

    /// Mutable buffers in the same order as [`tensors`](Self::tensors).
    pub fn buffers_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut out = Vec::with_capacity(12);
        for conv in &mut self.convs {
            out.push(&mut conv.weight);
            out.push(&mut conv.bias);
        }
        out.push(&mut self.fc1.weight);
        out.push(&mut self.fc1.bias);
        out.push(&mut self.fc2.weight);
        out.push(&mut self.fc2.bias);
        out
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.data.len()).sum()
    }

    /// All parameters concatenated in checkpoint order.
    pub fn flatten(&self) -> Vec<f64> {
        self.tensors().iter().flat_map(|t| t.data.iter().copied()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.data.iter().all(|v| v.is_finite()))
    }

    /// `self += a · other`.
    pub fn axpy(&mut self, a: f64, other: &RegressorParams) {
        for (dst, src) in self.buffers_mut().into_iter().zip(other.tensors()) {
            for (d, s) in dst.iter_mut().zip(src.data) {
                *d += a * s;
            }
        }
    }

    pub fn scale(&mut self, a: f64) {
        for buf in self.buffers_mut() {
            for v in buf.iter_mut() {
                *v *= a;
            }
        }
    }

    pub fn norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.data.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }
}

/// Channel-major feature map.
#[derive(Clone, Debug)]
pub(crate) struct FeatureMap {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

fn out_len(n: usize) -> usize {
    (n + 1) / 2
}

/// Patch matrix: one row of `in_channels·9` taps per output pixel, with
/// zeros where the window leaves the input.
fn im2col(x: &FeatureMap) -> Vec<f64> {
    let (h, w) = (x.height, x.width);
    let (oh, ow) = (out_len(h), out_len(w));
    let taps = x.channels * K * K;
    let mut cols = vec![0.0; oh * ow * taps];
    for oy in 0..oh {
        for ox in 0..ow {
            let patch = &mut cols[(oy * ow + ox) * taps..(oy * ow + ox + 1) * taps];
            for i in 0..x.channels {
                let plane = &x.data[i * h * w..(i + 1) * h * w];
                for ky in 0..K {
                    let iy = 2 * oy + ky;
                    if iy == 0 || iy > h {
                        continue;
                    }
                    for kx in 0..K {
                        let ix = 2 * ox + kx;
                        if ix == 0 || ix > w {
                            continue;
                        }
                        patch[(i * K + ky) * K + kx] = plane[(iy - 1) * w + ix - 1];
                    }
                }
            }
        }
    }
    cols
}

/// Inverse scatter of [`im2col`]: adds each patch tap back onto its pixel.
fn col2im(dcols: &[f64], channels: usize, h: usize, w: usize) -> Vec<f64> {
    let (oh, ow) = (out_len(h), out_len(w));
    let taps = channels * K * K;
    let mut dx = vec![0.0; channels * h * w];
    for oy in 0..oh {
        for ox in 0..ow {
            let patch = &dcols[(oy * ow + ox) * taps..(oy * ow + ox + 1) * taps];
            for i in 0..channels {
                for ky in 0..K {
                    let iy = 2 * oy + ky;
                    if iy == 0 || iy > h {
                        continue;
                    }
                    for kx in 0..K {
                        let ix = 2 * ox + kx;
                        if ix == 0 || ix > w {
                            continue;
                        }
                        dx[(i * h + iy - 1) * w + ix - 1] += patch[(i * K + ky) * K + kx];
                    }
                }
            }
        }
    }
    dx
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for j in 0..4 {
            acc[j] += x[j] * y[j];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yv, xv) in y.iter_mut().zip(x) {
        *yv += a * xv;
    }
}

/// Returns the output map and the patch matrix kept for the reverse pass.
fn conv_forward(conv: &Conv2d, x: &FeatureMap) -> (FeatureMap, Vec<f64>) {
    debug_assert_eq!(x.channels, conv.in_channels);
    let (oh, ow) = (out_len(x.height), out_len(x.width));
    let taps = conv.in_channels * K * K;
    let cols = im2col(x);
    let pixels = oh * ow;
    let mut y = vec![0.0; conv.out_channels * pixels];
    for (o, (out, wrow)) in y.chunks_exact_mut(pixels).zip(conv.weight.chunks_exact(taps)).enumerate() {
        for (v, patch) in out.iter_mut().zip(cols.chunks_exact(taps)) {
            *v = conv.bias[o] + dot(wrow, patch);
        }
    }
    let map = FeatureMap {
        channels: conv.out_channels,
        height: oh,
        width: ow,
        data: y,
    };
    (map, cols)
}

/// Accumulates weight and bias gradients into `grad`; returns the input
/// gradient when `need_input` is set.
fn conv_backward(
    conv: &Conv2d,
    input_shape: (usize, usize, usize),
    cols: &[f64],
    dy: &[f64],
    grad: &mut Conv2d,
    need_input: bool,
) -> Option<Vec<f64>> {
    let (channels, h, w) = input_shape;
    let pixels = out_len(h) * out_len(w);
    let taps = conv.in_channels * K * K;
    let mut dcols = need_input.then(|| vec![0.0; cols.len()]);
    for (o, dout) in dy.chunks_exact(pixels).enumerate() {
        grad.bias[o] += dout.iter().sum::<f64>();
        let gw = &mut grad.weight[o * taps..(o + 1) * taps];
        let wrow = &conv.weight[o * taps..(o + 1) * taps];
        for (p, (&d, patch)) in dout.iter().zip(cols.chunks_exact(taps)).enumerate() {
            if d == 0.0 {
                continue;
            }
            axpy(d, patch, gw);
            if let Some(dc) = dcols.as_mut() {
                axpy(d, wrow, &mut dc[p * taps..(p + 1) * taps]);
            }
        }
    }
    dcols.map(|dc| col2im(&dc, channels, h, w))
}

fn leaky(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        LEAKY_SLOPE * v
    }
}

fn leaky_grad(pre: f64) -> f64 {
    if pre > 0.0 {
        1.0
    } else {
        LEAKY_SLOPE
    }
}

fn dense_forward(d: &Dense, x: &[f64]) -> Vec<f64> {
    d.weight
        .chunks_exact(d.in_dim)
        .zip(&d.bias)
        .map(|(row, b)| b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
        .collect()
}

fn dense_backward(d: &Dense, x: &[f64], dy: &[f64], grad: &mut Dense) -> Vec<f64> {
    let mut dx = vec![0.0; d.in_dim];
    for (o, &g) in dy.iter().enumerate() {
        grad.bias[o] += g;
        let row = &d.weight[o * d.in_dim..(o + 1) * d.in_dim];
        let grow = &mut grad.weight[o * d.in_dim..(o + 1) * d.in_dim];
        for ((gw, (w, xv)), dxv) in grow.iter_mut().zip(row.iter().zip(x)).zip(dx.iter_mut()) {
            *gw += g * xv;
            *dxv += g * w;
        }
    }
    dx
}

/// Per-channel spatial mean.
pub(crate) fn global_average_pool(x: &FeatureMap) -> Vec<f64> {
    let n = (x.height * x.width) as f64;
    x.data
        .chunks_exact(x.height * x.width)
        .map(|c| c.iter().sum::<f64>() / n)
        .collect()
}

/// Activations retained for the reverse pass.
pub(crate) struct ForwardCache {
    /// Input followed by each post-activation conv output.
    maps: Vec<FeatureMap>,
    /// Pre-activation conv outputs.
    pre: Vec<Vec<f64>>,
    /// Patch matrices of each conv input.
    cols: Vec<Vec<f64>>,
    pooled: Vec<f64>,
    hidden_pre: Vec<f64>,
    hidden: Vec<f64>,
    pub coeffs: [f64; NUM_COEFFS],
}

pub(crate) fn stack_input(drc: &RealImage, phase: &RealImage) -> Result<FeatureMap> {
    if drc.size() != phase.size() {
        return Err(Error::Shape {
            expected: format!("{0}x{0} phase map", drc.size()),
            actual: format!("{0}x{0}", phase.size()),
        });
    }
    let m = drc.size();
    if m < MIN_INPUT_SIZE {
        return Err(Error::Size(format!(
            "regressor input must be at least {MIN_INPUT_SIZE}x{MIN_INPUT_SIZE}, got {m}x{m}"
        )));
    }
    let mut data = Vec::with_capacity(2 * m * m);
    data.extend_from_slice(drc.as_slice());
    data.extend_from_slice(phase.as_slice());
    Ok(FeatureMap {
        channels: 2,
        height: m,
        width: m,
        data,
    })
}

pub(crate) fn forward_cached(params: &RegressorParams, input: FeatureMap) -> Result<ForwardCache> {
    let mut maps = vec![input];
    let mut pre = Vec::with_capacity(4);
    let mut cols = Vec::with_capacity(4);
    for conv in &params.convs {
        let (mut y, c) = conv_forward(conv, maps.last().unwrap());
        cols.push(c);
        pre.push(y.data.clone());
        for v in &mut y.data {
            *v = leaky(*v);
        }
        maps.push(y);
    }
    let pooled = global_average_pool(maps.last().unwrap());
    let hidden_pre = dense_forward(&params.fc1, &pooled);
    let hidden: Vec<f64> = hidden_pre.iter().map(|&v| leaky(v)).collect();
    let out = dense_forward(&params.fc2, &hidden);
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("regressor activations"));
    }
    let mut coeffs = [0.0; NUM_COEFFS];
    coeffs.copy_from_slice(&out);
    Ok(ForwardCache {
        maps,
        pre,
        cols,
        pooled,
        hidden_pre,
        hidden,
        coeffs,
    })
}

/// Parameter gradient given `∂L/∂coeffs`. Inputs receive no gradient.
pub(crate) fn backward(
    params: &RegressorParams,
    cache: &ForwardCache,
    d_coeffs: &[f64; NUM_COEFFS],
) -> RegressorParams {
    let mut grad = RegressorParams::zeros();
    let d_hidden = dense_backward(&params.fc2, &cache.hidden, d_coeffs, &mut grad.fc2);
    let d_hidden_pre: Vec<f64> = d_hidden
        .iter()
        .zip(&cache.hidden_pre)
        .map(|(g, &p)| g * leaky_grad(p))
        .collect();
    let d_pooled = dense_backward(&params.fc1, &cache.pooled, &d_hidden_pre, &mut grad.fc1);

    let last = cache.maps.last().unwrap();
    let area = last.height * last.width;
    let mut d_map: Vec<f64> = d_pooled
        .iter()
        .flat_map(|&g| std::iter::repeat(g / area as f64).take(area))
        .collect();
    for layer in (0..params.convs.len()).rev() {
        for (g, &p) in d_map.iter_mut().zip(&cache.pre[layer]) {
            *g *= leaky_grad(p);
        }
        let x = &cache.maps[layer];
        let next = conv_backward(
            &params.convs[layer],
            (x.channels, x.height, x.width),
            &cache.cols[layer],
            &d_map,
            &mut grad.convs[layer],
            layer > 0,
        );
        if let Some(next) = next {
            d_map = next;
        }
    }
    grad
}

/// Coefficients predicted from a DRC image and a phase map of equal shape.
pub fn regressor_forward(
    drc: &RealImage,
    phase: &RealImage,
    params: &RegressorParams,
) -> Result<PhasePolynomial> {
    let cache = forward_cached(params, stack_input(drc, phase)?)?;
    Ok(PhasePolynomial::new(cache.coeffs))
}

/// Pooled 64-vector for the given input.
pub fn pooled_features(
    drc: &RealImage,
    phase: &RealImage,
    params: &RegressorParams,
) -> Result<Vec<f64>> {
    Ok(forward_cached(params, stack_input(drc, phase)?)?.pooled)
}

/// Post-activation output of the last convolution, channel-major.
pub fn last_feature_map(
    drc: &RealImage,
    phase: &RealImage,
    params: &RegressorParams,
) -> Result<Vec<f64>> {
    let cache = forward_cached(params, stack_input(drc, phase)?)?;
    Ok(cache.maps.last().unwrap().data.clone())
}
