//! Small convolutional classifier trained from scratch.
//!
//! Parameters live in one flat `Vec<f64>`; each layer owns a contiguous
//! slice (weights then biases). Training runs in f64 and the final weights
//! are rounded to f32 so that a saved model reloads bit-exact.

use super::{bce_with_logit, sigmoid, ModelError, TrainReport};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputShape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl InputShape {
    pub fn len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Default for InputShape {
    fn default() -> Self {
        Self {
            channels: 3,
            height: 64,
            width: 64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LayerSpec {
    /// Same-padded, stride-1 convolution with an odd square kernel.
    Conv {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
    },
    Relu,
    /// 2×2 max pooling with stride 2 (odd trailing rows/columns dropped).
    MaxPool2,
    GlobalAvgPool,
    /// Affine map over the flattened input.
    Dense {
        inputs: usize,
        outputs: usize,
    },
}

impl LayerSpec {
    fn param_count(&self) -> usize {
        match *self {
            LayerSpec::Conv {
                in_channels,
                out_channels,
                kernel,
            } => out_channels * in_channels * kernel * kernel + out_channels,
            LayerSpec::Dense { inputs, outputs } => outputs * inputs + outputs,
            _ => 0,
        }
    }

    fn fan_in(&self) -> usize {
        match *self {
            LayerSpec::Conv {
                in_channels,
                kernel,
                ..
            } => in_channels * kernel * kernel,
            LayerSpec::Dense { inputs, .. } => inputs,
            _ => 0,
        }
    }
}

/// Layer list plus input shape. The network emits one logit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub input: InputShape,
    pub layers: Vec<LayerSpec>,
}

impl Architecture {
    /// Three conv/ReLU/pool blocks (8, 16, 32 channels), global average
    /// pooling, one logit.
    pub fn default_for(input: InputShape) -> Self {
        let mut layers = Vec::new();
        let mut ch = input.channels;
        for out in [8, 16, 32] {
            layers.push(LayerSpec::Conv {
                in_channels: ch,
                out_channels: out,
                kernel: 3,
            });
            layers.push(LayerSpec::Relu);
            layers.push(LayerSpec::MaxPool2);
            ch = out;
        }
        layers.push(LayerSpec::GlobalAvgPool);
        layers.push(LayerSpec::Dense {
            inputs: ch,
            outputs: 1,
        });
        Self { input, layers }
    }

    /// A single affine map from the flattened image to the logit.
    pub fn affine(input: InputShape) -> Self {
        Self {
            input,
            layers: vec![LayerSpec::Dense {
                inputs: input.len(),
                outputs: 1,
            }],
        }
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(LayerSpec::param_count).sum()
    }

    /// Walk the layers checking shapes. Returns the per-layer output shapes.
    pub fn validate(&self) -> Result<Vec<InputShape>, ModelError> {
        let bad =
            |i: usize, why: &str| ModelError::InvalidArchitecture(format!("layer {i}: {why}"));
        if self.layers.is_empty() {
            return Err(ModelError::InvalidArchitecture("no layers".into()));
        }
        if self.input.is_empty() {
            return Err(ModelError::InvalidArchitecture("empty input".into()));
        }
        let mut s = self.input;
        let mut shapes = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            s = match *layer {
                LayerSpec::Conv {
                    in_channels,
                    out_channels,
                    kernel,
                } => {
                    if in_channels != s.channels {
                        return Err(bad(i, "input channels do not match"));
                    }
                    if kernel % 2 == 0 || out_channels == 0 {
                        return Err(bad(i, "kernel must be odd and output non-empty"));
                    }
                    InputShape {
                        channels: out_channels,
                        ..s
                    }
                }
                LayerSpec::Relu => s,
                LayerSpec::MaxPool2 => {
                    if s.height < 2 || s.width < 2 {
                        return Err(bad(i, "pooling below 2x2"));
                    }
                    InputShape {
                        channels: s.channels,
                        height: s.height / 2,
                        width: s.width / 2,
                    }
                }
                LayerSpec::GlobalAvgPool => InputShape {
                    channels: s.channels,
                    height: 1,
                    width: 1,
                },
                LayerSpec::Dense { inputs, outputs } => {
                    if inputs != s.len() || outputs == 0 {
                        return Err(bad(i, "dense input size does not match"));
                    }
                    InputShape {
                        channels: outputs,
                        height: 1,
                        width: 1,
                    }
                }
            };
            shapes.push(s);
        }
        if s.len() != 1 {
            return Err(ModelError::InvalidArchitecture(
                "network must end in a single logit".into(),
            ));
        }
        Ok(shapes)
    }
}

impl Default for Architecture {
    fn default() -> Self {
        Architecture::default_for(InputShape::default())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CnnModel {
    pub arch: Architecture,
    pub params: Vec<f64>,
    pub seed: u64,
    shapes: Vec<InputShape>,
    offsets: Vec<usize>,
}

/// Build a network with fan-in scaled uniform initialization,
/// U(-1/√fan_in, 1/√fan_in) for weights and biases alike.
pub fn build_cnn(arch: Architecture, seed: u64) -> Result<CnnModel, ModelError> {
    let mut model = CnnModel::zeroed(arch, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (i, layer) in model.arch.layers.clone().iter().enumerate() {
        let bound = 1.0 / (layer.fan_in().max(1) as f64).sqrt();
        for w in model.layer_params_mut(i) {
            *w = rng.gen_range(-bound..bound);
        }
    }
    model.round_to_f32();
    Ok(model)
}

impl CnnModel {
    pub fn zeroed(arch: Architecture, seed: u64) -> Result<Self, ModelError> {
        let shapes = arch.validate()?;
        let mut offsets = Vec::with_capacity(arch.layers.len() + 1);
        let mut o = 0;
        for l in &arch.layers {
            offsets.push(o);
            o += l.param_count();
        }
        offsets.push(o);
        Ok(Self {
            params: vec![0.0; o],
            arch,
            seed,
            shapes,
            offsets,
        })
    }

    pub fn from_params(
        arch: Architecture,
        seed: u64,
        params: Vec<f64>,
    ) -> Result<Self, ModelError> {
        let mut m = Self::zeroed(arch, seed)?;
        if params.len() != m.params.len() {
            return Err(ModelError::CorruptedLength {
                expected: m.params.len(),
                found: params.len(),
            });
        }
        m.params = params;
        Ok(m)
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn input(&self) -> InputShape {
        self.arch.input
    }

    pub fn layer_params_mut(&mut self, layer: usize) -> &mut [f64] {
        let (a, b) = (self.offsets[layer], self.offsets[layer + 1]);
        &mut self.params[a..b]
    }

    pub fn round_to_f32(&mut self) {
        for p in &mut self.params {
            *p = *p as f32 as f64;
        }
    }

    fn check_input(&self, image: &[f64]) -> Result<(), ModelError> {
        if image.len() != self.arch.input.len() {
            return Err(ModelError::InputSize {
                expected: self.arch.input.len(),
                found: image.len(),
            });
        }
        Ok(())
    }

    /// Logit for one image (channel-major, values in [0, 1]).
    pub fn logit(&self, image: &[f64]) -> Result<f64, ModelError> {
        self.check_input(image)?;
        Ok(self.run_from(0, image.to_vec(), &self.params, None))
    }

    /// Probability of the positive class.
    pub fn forward(&self, image: &[f64]) -> Result<f64, ModelError> {
        Ok(sigmoid(self.logit(image)?))
    }

    /// Run layers `start..` on `x` (the input to layer `start`), optionally
    /// recording every intermediate output.
    fn run_from(
        &self,
        start: usize,
        mut x: Vec<f64>,
        params: &[f64],
        mut trace: Option<&mut Vec<Vec<f64>>>,
    ) -> f64 {
        for i in start..self.arch.layers.len() {
            let in_shape = if i == 0 {
                self.arch.input
            } else {
                self.shapes[i - 1]
            };
            let p = &params[self.offsets[i]..self.offsets[i + 1]];
            x = layer_forward(&self.arch.layers[i], in_shape, self.shapes[i], p, &x);
            if let Some(t) = trace.as_deref_mut() {
                t.push(x.clone());
            }
        }
        x[0]
    }

    /// Activations: `acts[0]` is the input, `acts[i + 1]` the output of
    /// layer `i`.
    fn activations(&self, image: &[f64], params: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = vec![image.to_vec()];
        self.run_from(0, image.to_vec(), params, Some(&mut acts));
        acts
    }

    /// Accumulate `scale · ∂logit/∂params` into `grad`, given the forward
    /// activations.
    fn backward(&self, acts: &[Vec<f64>], params: &[f64], scale: f64, grad: &mut [f64]) {
        let mut delta = vec![scale];
        for i in (0..self.arch.layers.len()).rev() {
            let in_shape = if i == 0 {
                self.arch.input
            } else {
                self.shapes[i - 1]
            };
            let (a, b) = (self.offsets[i], self.offsets[i + 1]);
            delta = layer_backward(
                &self.arch.layers[i],
                in_shape,
                self.shapes[i],
                &params[a..b],
                &acts[i],
                &acts[i + 1],
                &delta,
                &mut grad[a..b],
                i > 0,
            );
        }
    }

    /// Mean BCE over a batch and its gradient with respect to the
    /// parameters.
    pub fn loss_and_grad(&self, batch: &[(&[f64], bool)]) -> (f64, Vec<f64>) {
        loss_and_grad_with(self, &self.params, batch)
    }

    /// Mean BCE over a set of samples.
    pub fn mean_loss(&self, samples: &[(&[f64], bool)]) -> f64 {
        if samples.is_empty() {
            return 0.0;
        }
        samples
            .iter()
            .map(|(x, y)| bce_with_logit(self.run_from(0, x.to_vec(), &self.params, None), *y))
            .sum::<f64>()
            / samples.len() as f64
    }
}

fn loss_and_grad_with(
    model: &CnnModel,
    params: &[f64],
    batch: &[(&[f64], bool)],
) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; params.len()];
    let n = batch.len().max(1) as f64;
    let mut loss = 0.0;
    for (x, y) in batch {
        let acts = model.activations(x, params);
        let z = acts.last().unwrap()[0];
        loss += bce_with_logit(z, *y);
        let dz = sigmoid(z) - if *y { 1.0 } else { 0.0 };
        model.backward(&acts, params, dz / n, &mut grad);
    }
    (loss / n, grad)
}

fn layer_forward(
    layer: &LayerSpec,
    s: InputShape,
    o: InputShape,
    p: &[f64],
    x: &[f64],
) -> Vec<f64> {
    match *layer {
        LayerSpec::Conv {
            in_channels,
            out_channels,
            kernel,
        } => {
            let (h, w) = (s.height, s.width);
            let plane = h * w;
            let kk = kernel * kernel;
            let (weights, bias) = p.split_at(out_channels * in_channels * kk);
            let mut out = vec![0.0; out_channels * plane];
            for oc in 0..out_channels {
                let dst = &mut out[oc * plane..(oc + 1) * plane];
                dst.fill(bias[oc]);
                for ic in 0..in_channels {
                    let src = &x[ic * plane..(ic + 1) * plane];
                    let wk = &weights[(oc * in_channels + ic) * kk..][..kk];
                    conv_accumulate(dst, src, wk, h, w, kernel);
                }
            }
            out
        }
        LayerSpec::Relu => x.iter().map(|v| v.max(0.0)).collect(),
        LayerSpec::MaxPool2 => {
            let mut out = vec![0.0; o.len()];
            for c in 0..s.channels {
                for y in 0..o.height {
                    for xx in 0..o.width {
                        let base = c * s.height * s.width;
                        let i0 = base + 2 * y * s.width + 2 * xx;
                        let m = x[i0]
                            .max(x[i0 + 1])
                            .max(x[i0 + s.width])
                            .max(x[i0 + s.width + 1]);
                        out[c * o.height * o.width + y * o.width + xx] = m;
                    }
                }
            }
            out
        }
        LayerSpec::GlobalAvgPool => {
            let plane = s.height * s.width;
            (0..s.channels)
                .map(|c| x[c * plane..(c + 1) * plane].iter().sum::<f64>() / plane as f64)
                .collect()
        }
        LayerSpec::Dense { inputs, outputs } => {
            let (weights, bias) = p.split_at(outputs * inputs);
            (0..outputs)
                .map(|j| {
                    bias[j]
                        + weights[j * inputs..(j + 1) * inputs]
                            .iter()
                            .zip(x)
                            .map(|(a, b)| a * b)
                            .sum::<f64>()
                })
                .collect()
        }
    }
}

/// Row and column ranges of the output touched by kernel tap (k, l).
#[inline]
fn tap_range(k: usize, pad: usize, n: usize) -> (usize, usize) {
    let lo = pad.saturating_sub(k);
    let hi = (n + pad).saturating_sub(k).min(n);
    (lo, hi)
}

/// dst[y][x] += Σ w[k][l] · src[y + k - pad][x + l - pad]
fn conv_accumulate(dst: &mut [f64], src: &[f64], wk: &[f64], h: usize, w: usize, kernel: usize) {
    let pad = kernel / 2;
    for k in 0..kernel {
        let (y0, y1) = tap_range(k, pad, h);
        for l in 0..kernel {
            let wv = wk[k * kernel + l];
            let (x0, x1) = tap_range(l, pad, w);
            if x0 >= x1 {
                continue;
            }
            for y in y0..y1 {
                let sy = y + k - pad;
                let d = &mut dst[y * w + x0..y * w + x1];
                let s = &src[sy * w + x0 + l - pad..sy * w + x1 + l - pad];
                for (a, b) in d.iter_mut().zip(s) {
                    *a += wv * b;
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn layer_backward(
    layer: &LayerSpec,
    s: InputShape,
    o: InputShape,
    p: &[f64],
    x: &[f64],
    out: &[f64],
    delta: &[f64],
    grad: &mut [f64],
    need_input_grad: bool,
) -> Vec<f64> {
    match *layer {
        LayerSpec::Conv {
            in_channels,
            out_channels,
            kernel,
        } => {
            let (h, w) = (s.height, s.width);
            let plane = h * w;
            let kk = kernel * kernel;
            let pad = kernel / 2;
            let n_w = out_channels * in_channels * kk;
            let (weights, _) = p.split_at(n_w);
            let (gw, gb) = grad.split_at_mut(n_w);
            let mut dx = if need_input_grad {
                vec![0.0; x.len()]
            } else {
                Vec::new()
            };
            for oc in 0..out_channels {
                let d = &delta[oc * plane..(oc + 1) * plane];
                gb[oc] += d.iter().sum::<f64>();
                for ic in 0..in_channels {
                    let src = &x[ic * plane..(ic + 1) * plane];
                    let wi = (oc * in_channels + ic) * kk;
                    for k in 0..kernel {
                        let (y0, y1) = tap_range(k, pad, h);
                        for l in 0..kernel {
                            let (x0, x1) = tap_range(l, pad, w);
                            if x0 >= x1 {
                                continue;
                            }
                            let wv = weights[wi + k * kernel + l];
                            let mut acc = 0.0;
                            for y in y0..y1 {
                                let sy = y + k - pad;
                                let dr = &d[y * w + x0..y * w + x1];
                                let sr = &src[sy * w + x0 + l - pad..sy * w + x1 + l - pad];
                                acc += dr.iter().zip(sr).map(|(a, b)| a * b).sum::<f64>();
                                if need_input_grad {
                                    let gr = &mut dx[ic * plane + sy * w + x0 + l - pad
                                        ..ic * plane + sy * w + x1 + l - pad];
                                    for (g, dv) in gr.iter_mut().zip(dr) {
                                        *g += wv * dv;
                                    }
                                }
                            }
                            gw[wi + k * kernel + l] += acc;
                        }
                    }
                }
            }
            dx
        }
        LayerSpec::Relu => x
            .iter()
            .zip(delta)
            .map(|(v, d)| if *v > 0.0 { *d } else { 0.0 })
            .collect(),
        LayerSpec::MaxPool2 => {
            let mut dx = vec![0.0; x.len()];
            for c in 0..s.channels {
                let base = c * s.height * s.width;
                for y in 0..o.height {
                    for xx in 0..o.width {
                        let oi = c * o.height * o.width + y * o.width + xx;
                        let i0 = base + 2 * y * s.width + 2 * xx;
                        // first position holding the max, in row-major order
                        let arg = [i0, i0 + 1, i0 + s.width, i0 + s.width + 1]
                            .into_iter()
                            .find(|&i| x[i] == out[oi])
                            .unwrap_or(i0);
                        dx[arg] += delta[oi];
                    }
                }
            }
            dx
        }
        LayerSpec::GlobalAvgPool => {
            let plane = s.height * s.width;
            let mut dx = vec![0.0; x.len()];
            for c in 0..s.channels {
                let g = delta[c] / plane as f64;
                dx[c * plane..(c + 1) * plane].fill(g);
            }
            dx
        }
        LayerSpec::Dense { inputs, outputs } => {
            let (weights, _) = p.split_at(outputs * inputs);
            let (gw, gb) = grad.split_at_mut(outputs * inputs);
            let mut dx = vec![0.0; if need_input_grad { inputs } else { 0 }];
            for j in 0..outputs {
                gb[j] += delta[j];
                let row = &mut gw[j * inputs..(j + 1) * inputs];
                for (g, v) in row.iter_mut().zip(x) {
                    *g += delta[j] * v;
                }
                if need_input_grad {
                    for (g, wv) in dx.iter_mut().zip(&weights[j * inputs..(j + 1) * inputs]) {
                        *g += delta[j] * wv;
                    }
                }
            }
            dx
        }
    }
}

/// Which side of every ReLU and which window element of every max pool
/// each activation falls on, for layers `from..`. `first` is the input to
/// layer `from`; `later[j]` the input to layer `from + 1 + j`.
fn kink_pattern(model: &CnnModel, from: usize, first: &[f64], later: &[Vec<f64>]) -> Vec<u32> {
    let mut out = Vec::new();
    for k in from..model.arch.layers.len() {
        let x = if k == from {
            first
        } else {
            &later[k - from - 1]
        };
        match model.arch.layers[k] {
            LayerSpec::Relu => out.extend(x.iter().map(|v| u32::from(*v > 0.0))),
            LayerSpec::MaxPool2 => {
                let s = model.shapes[k - 1];
                let o = model.shapes[k];
                for c in 0..s.channels {
                    for y in 0..o.height {
                        for xx in 0..o.width {
                            let i0 = c * s.height * s.width + 2 * y * s.width + 2 * xx;
                            let window = [i0, i0 + 1, i0 + s.width, i0 + s.width + 1];
                            let mut best = 0;
                            for (j, &i) in window.iter().enumerate() {
                                if x[i] > x[window[best]] {
                                    best = j;
                                }
                            }
                            out.push(best as u32);
                        }
                    }
                }
            }
            _ => {}
        }
    }
    out
}

/// Output of parameterized layer `layer` after adding `delta` to its local
/// parameter `j`, as an update of the unperturbed output: a conv weight
/// moves one output channel by `delta` times a shifted input plane, a
/// dense weight one output by `delta` times one input.
fn perturbed_output(
    model: &CnnModel,
    layer: usize,
    acts: &[Vec<f64>],
    j: usize,
    delta: f64,
) -> Vec<f64> {
    let in_shape = if layer == 0 {
        model.arch.input
    } else {
        model.shapes[layer - 1]
    };
    match model.arch.layers[layer] {
        LayerSpec::Conv {
            in_channels,
            out_channels,
            kernel,
        } => {
            let (h, w) = (in_shape.height, in_shape.width);
            let plane = h * w;
            let kk = kernel * kernel;
            let mut out = acts[layer + 1].clone();
            if j < out_channels * in_channels * kk {
                let (oc, ic, tap) = (j / (in_channels * kk), (j / kk) % in_channels, j % kk);
                let mut onehot = vec![0.0; kk];
                onehot[tap] = delta;
                let src = &acts[layer][ic * plane..(ic + 1) * plane];
                conv_accumulate(
                    &mut out[oc * plane..(oc + 1) * plane],
                    src,
                    &onehot,
                    h,
                    w,
                    kernel,
                );
            } else {
                let oc = j - out_channels * in_channels * kk;
                out[oc * plane..(oc + 1) * plane]
                    .iter_mut()
                    .for_each(|v| *v += delta);
            }
            out
        }
        LayerSpec::Dense { inputs, outputs } => {
            let mut out = acts[layer + 1].clone();
            if j < outputs * inputs {
                out[j / inputs] += delta * acts[layer][j % inputs];
            } else {
                out[j - outputs * inputs] += delta;
            }
            out
        }
        _ => unreachable!("layer {layer} has no parameters"),
    }
}

/// Compare the analytic gradient of the mean BCE against central finite
/// differences for every parameter; return the largest relative error
/// |a − n| / max(|a|, |n|, 1e-8).
///
/// The network is piecewise smooth, so a probe that moves any ReLU input
/// across zero or changes a max-pool winner measures a secant across a
/// kink rather than the derivative. For such parameters the step shrinks
/// by 10× (down to `h / 10⁴`) until both probes stay on the same piece.
pub fn gradient_check(model: &CnnModel, batch: &[(&[f64], bool)], h: f64) -> f64 {
    let (_, analytic) = model.loss_and_grad(batch);
    let acts: Vec<Vec<Vec<f64>>> = batch
        .iter()
        .map(|(x, _)| model.activations(x, &model.params))
        .collect();
    let mut worst: f64 = 0.0;
    for layer in 0..model.arch.layers.len() {
        let (a, b) = (model.offsets[layer], model.offsets[layer + 1]);
        if a == b {
            continue;
        }
        let base: Vec<Vec<u32>> = acts
            .iter()
            .map(|x| kink_pattern(model, layer + 1, &x[layer + 1], &x[layer + 2..]))
            .collect();
        let probe = |j: usize, delta: f64| -> (f64, bool) {
            let mut loss = 0.0;
            let mut same_piece = true;
            for (((_, y), x), pattern) in batch.iter().zip(&acts).zip(&base) {
                let out = perturbed_output(model, layer, x, j, delta);
                let mut trace = Vec::new();
                let z = model.run_from(layer + 1, out.clone(), &model.params, Some(&mut trace));
                loss += bce_with_logit(z, *y);
                same_piece = same_piece && kink_pattern(model, layer + 1, &out, &trace) == *pattern;
            }
            (loss / batch.len() as f64, same_piece)
        };
        for (i, &g) in analytic.iter().enumerate().take(b).skip(a) {
            let mut step = h;
            let numeric = loop {
                let (up, up_ok) = probe(i - a, step);
                let (down, down_ok) = probe(i - a, -step);
                if (up_ok && down_ok) || step <= h * 1e-4 {
                    break (up - down) / (2.0 * step);
                }
                step /= 10.0;
            };
            let rel = (g - numeric).abs() / g.abs().max(numeric.abs()).max(1e-8);
            worst = worst.max(rel);
        }
    }
    worst
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CnnTrainConfig {
    pub lr: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Stop once an epoch's mean training loss falls below this.
    pub stop_below: Option<f64>,
}

impl Default for CnnTrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.05,
            momentum: 0.9,
            epochs: 8,
            batch_size: 16,
            seed: 7,
            stop_below: None,
        }
    }
}

/// Mini-batch momentum SGD on mean BCE. The batch order of every epoch is
/// a seeded shuffle, so identical inputs give identical weights.
pub fn train_cnn(
    model: &mut CnnModel,
    train: &[(&[f64], bool)],
    val: &[(&[f64], bool)],
    cfg: &CnnTrainConfig,
) -> Result<TrainReport, ModelError> {
    super::check_labels(train.iter().map(|s| s.1))?;
    for (x, _) in train.iter().chain(val) {
        model.check_input(x)?;
    }
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut velocity = vec![0.0; model.params.len()];
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut report = TrainReport::default();
    let batch_size = cfg.batch_size.max(1);

    for epoch in 0..cfg.epochs {
        // Fisher–Yates with the seeded stream
        for i in (1..order.len()).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(batch_size) {
            let batch: Vec<(&[f64], bool)> = chunk.iter().map(|&i| train[i]).collect();
            let (loss, grad) = model.loss_and_grad(&batch);
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(ModelError::NonFiniteLoss {
                    epoch,
                    loss,
                    lr: cfg.lr,
                });
            }
            epoch_loss += loss * chunk.len() as f64;
            for ((w, v), g) in model.params.iter_mut().zip(&mut velocity).zip(&grad) {
                *v = cfg.momentum * *v - cfg.lr * g;
                *w += *v;
            }
        }
        let train_loss = epoch_loss / train.len() as f64;
        report.train_loss.push(train_loss);
        if !val.is_empty() {
            report.val_loss.push(model.mean_loss(val));
        }
        report.epochs = epoch + 1;
        if cfg.stop_below.is_some_and(|t| train_loss < t) {
            break;
        }
    }
    model.round_to_f32();
    report.train_auc = auc_of(model, train);
    if !val.is_empty() {
        report.val_auc = auc_of(model, val);
    }
    report.wall_clock_ms = started.elapsed().as_millis() as u64;
    Ok(report)
}

fn auc_of(model: &CnnModel, data: &[(&[f64], bool)]) -> Option<f64> {
    let mut scores = Vec::with_capacity(data.len());
    for (x, _) in data {
        scores.push(model.forward(x).ok()?);
    }
    let labels: Vec<bool> = data.iter().map(|s| s.1).collect();
    crate::metrics::roc_curve(&scores, &labels)
        .ok()
        .map(|c| c.auc)
}
