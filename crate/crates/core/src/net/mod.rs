//! Binary-connect feed-forward networks.
//!
//! Latent real weights are binarized with `sign` (ties to `+1`) and the
//! binary weights are what the memory stores. Forward and backward passes
//! always run on a concrete set of read-back weights, and the gradient with
//! respect to those weights is applied to the latent weights unchanged
//! (straight-through for both the binarization and the channel).

mod checkpoint;
mod layers;
mod optim;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use layers::ConvGeometry;

pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use optim::{lr_schedule, nesterov_update, sgd_inner_step, InnerOptConfig, Velocity};

/// Per-layer sign weights as read from memory.
pub type LayerWeights = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerKind {
    Dense {
        inputs: usize,
        outputs: usize,
    },
    /// Stride 1, zero "same" padding, odd square kernel.
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        height: usize,
        width: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    /// Biases live in reliable storage and are not counted in `n_l`.
    pub has_bias: bool,
    /// Fixed, reliably stored multiplier on the layer's linear map.
    pub scale: f64,
}

impl LayerSpec {
    pub fn dense(inputs: usize, outputs: usize) -> Self {
        LayerSpec {
            kind: LayerKind::Dense { inputs, outputs },
            has_bias: false,
            scale: 1.0,
        }
    }

    pub fn conv2d(in_channels: usize, out_channels: usize, kernel: usize, height: usize, width: usize) -> Self {
        LayerSpec {
            kind: LayerKind::Conv2d {
                in_channels,
                out_channels,
                kernel,
                height,
                width,
            },
            has_bias: false,
            scale: 1.0,
        }
    }

    pub fn with_bias(mut self, has_bias: bool) -> Self {
        self.has_bias = has_bias;
        self
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    /// Weights per output unit.
    pub fn fan_in(&self) -> usize {
        match self.kind {
            LayerKind::Dense { inputs, .. } => inputs,
            LayerKind::Conv2d { in_channels, kernel, .. } => in_channels * kernel * kernel,
        }
    }

    /// `n_l`: the number of stored binary weights.
    pub fn weight_count(&self) -> usize {
        match self.kind {
            LayerKind::Dense { inputs, outputs } => inputs * outputs,
            LayerKind::Conv2d {
                in_channels,
                out_channels,
                kernel,
                ..
            } => in_channels * out_channels * kernel * kernel,
        }
    }

    pub fn bias_count(&self) -> usize {
        if !self.has_bias {
            return 0;
        }
        match self.kind {
            LayerKind::Dense { outputs, .. } => outputs,
            LayerKind::Conv2d { out_channels, .. } => out_channels,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self.kind {
            LayerKind::Dense { inputs, .. } => inputs,
            LayerKind::Conv2d {
                in_channels,
                height,
                width,
                ..
            } => in_channels * height * width,
        }
    }

    pub fn output_dim(&self) -> usize {
        match self.kind {
            LayerKind::Dense { outputs, .. } => outputs,
            LayerKind::Conv2d {
                out_channels,
                height,
                width,
                ..
            } => out_channels * height * width,
        }
    }

    fn validate(&self, index: usize) -> Result<()> {
        if self.weight_count() == 0 || self.output_dim() == 0 {
            return Err(Error::Shape(format!("layer {} has no weights", index + 1)));
        }
        if let LayerKind::Conv2d { kernel, .. } = self.kind {
            if kernel % 2 == 0 {
                return Err(Error::Shape(format!(
                    "layer {}: convolution kernel must be odd, got {kernel}",
                    index + 1
                )));
            }
        }
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(Error::Shape(format!("layer {}: scale must be positive", index + 1)));
        }
        Ok(())
    }

    fn conv_geometry(&self) -> Option<ConvGeometry> {
        match self.kind {
            LayerKind::Conv2d {
                in_channels,
                out_channels,
                kernel,
                height,
                width,
            } => Some(ConvGeometry {
                in_channels,
                out_channels,
                kernel,
                height,
                width,
            }),
            LayerKind::Dense { .. } => None,
        }
    }
}

/// Input geometry: flat feature vectors use `height = width = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputShape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl InputShape {
    pub fn flat(features: usize) -> Self {
        InputShape {
            channels: features,
            height: 1,
            width: 1,
        }
    }

    pub fn dim(&self) -> usize {
        self.channels * self.height * self.width
    }
}

/// Desk architecture: optional conv front end, dense hidden layers scaled by
/// the width multiplier `rho`, dense classifier head.
#[derive(Debug, Clone, PartialEq)]
pub struct Architecture {
    pub input: InputShape,
    pub classes: usize,
    pub hidden: Vec<usize>,
    pub rho: f64,
    pub bias: bool,
    pub conv_channels: usize,
    pub conv_kernel: usize,
}

impl Architecture {
    fn scaled(&self, width: usize) -> usize {
        ((width as f64 * self.rho).round() as usize).max(1)
    }

    pub fn layers(&self) -> Result<Vec<LayerSpec>> {
        if !(self.rho.is_finite() && self.rho > 0.0) {
            return Err(Error::Config(format!("width multiplier must be positive, got {}", self.rho)));
        }
        if self.classes < 2 {
            return Err(Error::Config("need at least two classes".into()));
        }
        let mut layers = Vec::new();
        let mut dim = self.input.dim();
        if self.conv_channels > 0 {
            let out = self.scaled(self.conv_channels);
            let spec = LayerSpec::conv2d(
                self.input.channels,
                out,
                self.conv_kernel,
                self.input.height,
                self.input.width,
            );
            let fan_in = spec.fan_in();
            layers.push(spec.with_bias(self.bias).with_scale(1.0 / (fan_in as f64).sqrt()));
            dim = out * self.input.height * self.input.width;
        }
        for &w in &self.hidden {
            let w = self.scaled(w);
            layers.push(
                LayerSpec::dense(dim, w)
                    .with_bias(self.bias)
                    .with_scale(1.0 / (dim as f64).sqrt()),
            );
            dim = w;
        }
        layers.push(
            LayerSpec::dense(dim, self.classes)
                .with_bias(self.bias)
                .with_scale(1.0 / (dim as f64).sqrt()),
        );
        Ok(layers)
    }
}

/// Gradients aligned one-to-one with the latent weights and biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: LayerWeights,
    pub biases: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryNetwork {
    layers: Vec<LayerSpec>,
    latent: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    width_multiplier: f64,
}

impl BinaryNetwork {
    /// Network with all latent weights and biases at zero.
    pub fn new(layers: Vec<LayerSpec>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Shape("network needs at least one layer".into()));
        }
        for (i, layer) in layers.iter().enumerate() {
            layer.validate(i)?;
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].output_dim() != pair[1].input_dim() {
                return Err(Error::Shape(format!(
                    "layer {} outputs {} values but layer {} expects {}",
                    i + 1,
                    pair[0].output_dim(),
                    i + 2,
                    pair[1].input_dim()
                )));
            }
        }
        let latent = layers.iter().map(|l| vec![0.0; l.weight_count()]).collect();
        let biases = layers.iter().map(|l| vec![0.0; l.bias_count()]).collect();
        Ok(BinaryNetwork {
            layers,
            latent,
            biases,
            width_multiplier: 1.0,
        })
    }

    /// Glorot-uniform latent weights, zero biases.
    pub fn init_random<R: Rng + ?Sized>(layers: Vec<LayerSpec>, rng: &mut R) -> Result<Self> {
        let mut net = BinaryNetwork::new(layers)?;
        for (spec, latent) in net.layers.iter().zip(net.latent.iter_mut()) {
            let fan_out = spec.weight_count() / spec.fan_in();
            let bound = (6.0 / (spec.fan_in() + fan_out) as f64).sqrt().min(1.0);
            for w in latent.iter_mut() {
                *w = rng.random_range(-bound..=bound);
            }
        }
        Ok(net)
    }

    pub fn from_architecture<R: Rng + ?Sized>(arch: &Architecture, rng: &mut R) -> Result<Self> {
        let mut net = BinaryNetwork::init_random(arch.layers()?, rng)?;
        net.width_multiplier = arch.rho;
        Ok(net)
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn width_multiplier(&self) -> f64 {
        self.width_multiplier
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn classes(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim()
    }

    pub fn weight_counts(&self) -> Vec<usize> {
        self.layers.iter().map(LayerSpec::weight_count).collect()
    }

    pub fn latent(&self) -> &[Vec<f64>] {
        &self.latent
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    /// Replace all latent weights; values are clipped to `[-1, 1]`.
    pub fn set_latent(&mut self, latent: Vec<Vec<f64>>) -> Result<()> {
        self.check_weight_shapes(&latent)?;
        self.latent = latent;
        for layer in &mut self.latent {
            for w in layer.iter_mut() {
                *w = w.clamp(-1.0, 1.0);
            }
        }
        Ok(())
    }

    pub fn set_biases(&mut self, biases: Vec<Vec<f64>>) -> Result<()> {
        if biases.len() != self.layers.len()
            || biases.iter().zip(&self.layers).any(|(b, l)| b.len() != l.bias_count())
        {
            return Err(Error::Shape("bias arrays do not match layer specs".into()));
        }
        self.biases = biases;
        Ok(())
    }

    pub(crate) fn params_mut(&mut self) -> (&mut [Vec<f64>], &mut [Vec<f64>]) {
        (&mut self.latent, &mut self.biases)
    }

    /// Binary weights as they would be written to memory.
    pub fn binary_weights(&self) -> LayerWeights {
        self.latent.iter().map(|l| binarize(l)).collect()
    }

    pub fn check_weight_shapes(&self, weights: &[Vec<f64>]) -> Result<()> {
        if weights.len() != self.layers.len() {
            return Err(Error::Shape(format!(
                "{} weight arrays for {} layers",
                weights.len(),
                self.layers.len()
            )));
        }
        for (i, (w, l)) in weights.iter().zip(&self.layers).enumerate() {
            if w.len() != l.weight_count() {
                return Err(Error::Shape(format!(
                    "layer {}: {} weights, expected {}",
                    i + 1,
                    w.len(),
                    l.weight_count()
                )));
            }
        }
        Ok(())
    }

    fn batch_size(&self, x: &[f64]) -> Result<usize> {
        let dim = self.input_dim();
        if x.is_empty() || x.len() % dim != 0 {
            return Err(Error::Shape(format!(
                "input of length {} is not a non-empty batch of {dim}-dimensional rows",
                x.len()
            )));
        }
        Ok(x.len() / dim)
    }

    fn layer_forward(&self, index: usize, weights: &[f64], input: &[f64], batch: usize) -> Vec<f64> {
        let spec = &self.layers[index];
        let bias = spec.has_bias.then(|| self.biases[index].as_slice());
        match spec.conv_geometry() {
            Some(g) => layers::conv_forward(weights, bias, spec.scale, input, batch, g),
            None => layers::dense_forward(
                weights,
                bias,
                spec.scale,
                input,
                batch,
                spec.input_dim(),
                spec.output_dim(),
            ),
        }
    }

    /// Returns the input of every layer plus the final logits.
    fn forward_trace(&self, weights: &[Vec<f64>], x: &[f64]) -> Result<(Vec<Vec<f64>>, usize)> {
        self.check_weight_shapes(weights)?;
        let batch = self.batch_size(x)?;
        let mut trace = Vec::with_capacity(self.layers.len() + 1);
        trace.push(x.to_vec());
        for i in 0..self.layers.len() {
            let mut out = self.layer_forward(i, &weights[i], &trace[i], batch);
            if i + 1 < self.layers.len() {
                for v in out.iter_mut() {
                    *v = v.max(0.0);
                }
            }
            trace.push(out);
        }
        Ok((trace, batch))
    }
}

/// Sign binarization; exact zeros map to `+1`.
pub fn binarize(latent: &[f64]) -> Vec<f64> {
    latent
        .iter()
        .map(|&w| if w < 0.0 { -1.0 } else { 1.0 })
        .collect()
}

/// Logits `[batch, classes]` for a row-major input batch, computed with the
/// given read-back weights. The latent weights are not consulted.
pub fn forward(net: &BinaryNetwork, weights: &[Vec<f64>], x: &[f64]) -> Result<Vec<f64>> {
    let (mut trace, _) = net.forward_trace(weights, x)?;
    Ok(trace.pop().expect("trace holds logits"))
}

/// Mean softmax cross-entropy of a logits batch.
pub fn inner_loss(logits: &[f64], targets: &[usize]) -> Result<f64> {
    let (loss, _) = cross_entropy(logits, targets, false)?;
    Ok(loss)
}

/// Mean loss and, optionally, its gradient with respect to the logits.
fn cross_entropy(logits: &[f64], targets: &[usize], with_grad: bool) -> Result<(f64, Vec<f64>)> {
    if targets.is_empty() || logits.len() % targets.len() != 0 {
        return Err(Error::Shape(format!(
            "{} logits do not split into {} rows",
            logits.len(),
            targets.len()
        )));
    }
    let classes = logits.len() / targets.len();
    let batch = targets.len() as f64;
    let mut total = 0.0;
    let mut grad = if with_grad { vec![0.0; logits.len()] } else { Vec::new() };
    for (row_idx, (row, &t)) in logits.chunks_exact(classes).zip(targets).enumerate() {
        if t >= classes {
            return Err(Error::Shape(format!("target {t} out of range for {classes} classes")));
        }
        let top = argmax(row);
        let max = row[top];
        // The top term contributes exactly 1; ln_1p keeps tiny tails.
        let rest: f64 = row
            .iter()
            .enumerate()
            .filter(|&(c, _)| c != top)
            .map(|(_, &z)| (z - max).exp())
            .sum();
        let log_z = max + rest.ln_1p();
        total += log_z - row[t];
        if with_grad {
            let g = &mut grad[row_idx * classes..(row_idx + 1) * classes];
            for (c, (gc, &z)) in g.iter_mut().zip(row).enumerate() {
                let prob = (z - log_z).exp();
                *gc = (prob - if c == t { 1.0 } else { 0.0 }) / batch;
            }
        }
    }
    Ok((total / batch, grad))
}

/// Mean minibatch loss and its gradient with respect to the read-back
/// weights, to be applied directly to the latent weights.
pub fn backward_ste(
    net: &BinaryNetwork,
    weights: &[Vec<f64>],
    x: &[f64],
    y: &[usize],
) -> Result<(f64, Gradients)> {
    let (trace, batch) = net.forward_trace(weights, x)?;
    if batch != y.len() {
        return Err(Error::Shape(format!("{} inputs but {} targets", batch, y.len())));
    }
    let (loss, mut grad) = cross_entropy(&trace[trace.len() - 1], y, true)?;
    let n = net.layers.len();
    let mut grad_w = vec![Vec::new(); n];
    let mut grad_b = vec![Vec::new(); n];
    for i in (0..n).rev() {
        let spec = &net.layers[i];
        let input = &trace[i];
        let need_input = i > 0;
        let (gin, gw, gb) = match spec.conv_geometry() {
            Some(g) => layers::conv_backward(&weights[i], spec.scale, input, &grad, batch, g, need_input),
            None => layers::dense_backward(
                &weights[i],
                spec.scale,
                input,
                &grad,
                spec.input_dim(),
                spec.output_dim(),
                need_input,
            ),
        };
        grad_w[i] = gw;
        grad_b[i] = if spec.has_bias { gb } else { Vec::new() };
        if need_input {
            // ReLU gate of the previous layer's output.
            grad = gin
                .into_iter()
                .zip(input)
                .map(|(g, &a)| if a > 0.0 { g } else { 0.0 })
                .collect();
        }
    }
    Ok((
        loss,
        Gradients {
            weights: grad_w,
            biases: grad_b,
        },
    ))
}

/// Fraction of correct argmax predictions, as a percentage.
pub fn accuracy_percent(logits: &[f64], targets: &[usize]) -> f64 {
    if targets.is_empty() {
        return 0.0;
    }
    let classes = logits.len() / targets.len();
    let correct = logits
        .chunks_exact(classes)
        .zip(targets)
        .filter(|(row, &t)| argmax(row) == t)
        .count();
    100.0 * correct as f64 / targets.len() as f64
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}
