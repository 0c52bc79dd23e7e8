//! Desk-scale trainable convolutional network with per-filter-group
//! quantization (straight-through gradients) and slimmable execution.
//!
//! One weight set serves every configuration: pruning configurations run
//! the leading filters of each layer, quantization configurations quantize
//! filter groups on the fly. There is no batch normalization; activations
//! stay bounded through fan-in-scaled initialization and a fixed (untrained)
//! per-layer scale, which keeps width settings statistically uncoupled.

mod data;
mod exec;
mod quantize;

pub use data::{Dataset, Selection, Split, SyntheticSpec};
pub use quantize::{quantize, quantize_in_place};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::arch::{ArchitectureSpec, NetworkConfig};
use crate::error::{Error, Result};
use crate::objective::cross_entropy;

use exec::{backward_one, build_plan, forward_one};

/// Weight tensor of one convolutional layer, `out x in x k x k` row-major,
/// plus one bias per filter.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvWeights {
    pub out_c: usize,
    pub in_c: usize,
    pub k: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

/// Full weight set: convolution stack, mean-pool classifier, and the fixed
/// per-layer activation scales.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    pub conv: Vec<ConvWeights>,
    /// `classes x features` row-major.
    pub classifier_w: Vec<f64>,
    pub classifier_b: Vec<f64>,
    /// Fixed post-convolution scale per layer; not updated by training.
    pub act_scale: Vec<f64>,
    pub features: usize,
    pub classes: usize,
}

impl Weights {
    pub(crate) fn check_shapes(&self, arch: &ArchitectureSpec) -> Result<()> {
        if self.conv.len() != arch.layers.len()
            || self.features != arch.layers.last().map(|l| l.filters).unwrap_or(0)
            || self.classes != arch.num_classes
        {
            return Err(Error::ShapeMismatch(
                "weights do not match the architecture".into(),
            ));
        }
        for (i, (cw, layer)) in self.conv.iter().zip(&arch.layers).enumerate() {
            if cw.out_c != layer.filters || cw.in_c != layer.in_channels || cw.k != layer.kernel {
                return Err(Error::ShapeMismatch(format!(
                    "layer {i} weights are {}x{}x{}x{}, architecture expects {}x{}x{}x{}",
                    cw.out_c, cw.in_c, cw.k, cw.k, layer.filters, layer.in_channels, layer.kernel,
                    layer.kernel
                )));
            }
        }
        Ok(())
    }
}

/// Hyperparameters for weight training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    /// Epochs per weight-training phase.
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            momentum: 0.9,
            batch_size: 16,
            epochs: 3,
            seed: 0,
        }
    }
}

impl TrainSettings {
    pub fn validate(&self) -> Result<()> {
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 || self.batch_size == 0 {
            return Err(Error::InvalidInput(
                "training needs learning_rate >= 0 and batch_size >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Gradient accumulator shaped like [`Weights`].
#[derive(Debug, Clone)]
pub struct GradBuf {
    pub conv: Vec<ConvWeights>,
    pub classifier_w: Vec<f64>,
    pub classifier_b: Vec<f64>,
}

impl GradBuf {
    fn zeros_like(weights: &Weights) -> Self {
        GradBuf {
            conv: weights
                .conv
                .iter()
                .map(|c| ConvWeights {
                    out_c: c.out_c,
                    in_c: c.in_c,
                    k: c.k,
                    w: vec![0.0; c.w.len()],
                    b: vec![0.0; c.b.len()],
                })
                .collect(),
            classifier_w: vec![0.0; weights.classifier_w.len()],
            classifier_b: vec![0.0; weights.classifier_b.len()],
        }
    }

}

/// SGD-with-momentum state.
#[derive(Debug, Clone)]
pub struct SgdMomentum {
    velocity: GradBuf,
}

impl SgdMomentum {
    pub fn new(weights: &Weights) -> Self {
        SgdMomentum {
            velocity: GradBuf::zeros_like(weights),
        }
    }
}

fn apply_step(weights: &mut Weights, opt: &mut SgdMomentum, grad: &GradBuf, settings: &TrainSettings) {
    let lr = settings.learning_rate;
    let mu = settings.momentum;
    let update = |p: &mut [f64], v: &mut [f64], g: &[f64]| {
        for i in 0..p.len() {
            if g[i] == 0.0 && v[i] == 0.0 {
                continue; // untouched slice stays bitwise identical
            }
            v[i] = mu * v[i] + g[i];
            p[i] -= lr * v[i];
        }
    };
    for (i, c) in weights.conv.iter_mut().enumerate() {
        update(&mut c.w, &mut opt.velocity.conv[i].w, &grad.conv[i].w);
        update(&mut c.b, &mut opt.velocity.conv[i].b, &grad.conv[i].b);
    }
    update(
        &mut weights.classifier_w,
        &mut opt.velocity.classifier_w,
        &grad.classifier_w,
    );
    update(
        &mut weights.classifier_b,
        &mut opt.velocity.classifier_b,
        &grad.classifier_b,
    );
}

/// Fan-in-scaled uniform initialization: entries drawn from
/// `U(-sqrt(6/fan_in), sqrt(6/fan_in))`, giving entry variance 2/fan_in.
/// Biases start at zero, activation scales at one. Deterministic in `seed`.
pub fn init_weights(arch: &ArchitectureSpec, seed: u64) -> Result<Weights> {
    arch.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut conv = Vec::with_capacity(arch.layers.len());
    for layer in &arch.layers {
        let fan_in = (layer.in_channels * layer.kernel * layer.kernel) as f64;
        let bound = (6.0 / fan_in).sqrt();
        let len = layer.filters * layer.in_channels * layer.kernel * layer.kernel;
        let w: Vec<f64> = (0..len).map(|_| rng.gen_range(-bound..bound)).collect();
        conv.push(ConvWeights {
            out_c: layer.filters,
            in_c: layer.in_channels,
            k: layer.kernel,
            w,
            b: vec![0.0; layer.filters],
        });
    }
    let features = arch.layers.last().expect("validated").filters;
    let bound = (6.0 / features as f64).sqrt();
    let classifier_w: Vec<f64> = (0..arch.num_classes * features)
        .map(|_| rng.gen_range(-bound..bound))
        .collect();
    Ok(Weights {
        conv,
        classifier_w,
        classifier_b: vec![0.0; arch.num_classes],
        act_scale: vec![1.0; arch.layers.len()],
        features,
        classes: arch.num_classes,
    })
}

/// Logits for every sample of the batch under the given configuration;
/// `None` runs the full-width float network.
pub fn forward(
    arch: &ArchitectureSpec,
    weights: &Weights,
    cfg: Option<&NetworkConfig>,
    data: &Dataset,
    batch: &[usize],
) -> Result<Vec<Vec<f64>>> {
    let plan = build_plan(arch, weights, cfg)?;
    if data.shape() != arch.input_shape {
        return Err(Error::ShapeMismatch(format!(
            "dataset shape {:?} does not match input {:?}",
            data.shape(),
            arch.input_shape
        )));
    }
    Ok(batch
        .iter()
        .map(|&i| forward_one(&plan, weights, data.input(i), false).0)
        .collect())
}

/// Mean cross-entropy over the batch, forward only.
pub fn batch_ce(
    arch: &ArchitectureSpec,
    weights: &Weights,
    cfg: Option<&NetworkConfig>,
    data: &Dataset,
    batch: &[usize],
) -> Result<f64> {
    let logits = forward(arch, weights, cfg, data, batch)?;
    let labels: Vec<usize> = batch.iter().map(|&i| data.label(i)).collect();
    Ok(cross_entropy(&logits, &labels))
}

fn batch_gradient(
    arch: &ArchitectureSpec,
    weights: &Weights,
    cfg: Option<&NetworkConfig>,
    data: &Dataset,
    batch: &[usize],
    grad: &mut GradBuf,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::InvalidInput("empty batch".into()));
    }
    let plan = build_plan(arch, weights, cfg)?;
    let scale = 1.0 / batch.len() as f64;
    let mut ce = 0.0;
    for &i in batch {
        let (logits, trace) = forward_one(&plan, weights, data.input(i), true);
        let trace = trace.expect("trace requested");
        ce += crate::objective::cross_entropy_single(&logits, data.label(i));
        backward_one(&plan, weights, &trace, data.label(i), scale, grad);
    }
    ce *= scale;
    if !ce.is_finite() {
        return Err(Error::InvalidInput(format!(
            "non-finite training loss {ce} on a batch of {} samples",
            batch.len()
        )));
    }
    Ok(ce)
}

/// One SGD-with-momentum step on the batch cross-entropy through the
/// configured forward. Returns the pre-step batch loss.
pub fn train_step(
    arch: &ArchitectureSpec,
    weights: &mut Weights,
    opt: &mut SgdMomentum,
    cfg: Option<&NetworkConfig>,
    data: &Dataset,
    batch: &[usize],
    settings: &TrainSettings,
) -> Result<f64> {
    settings.validate()?;
    let mut grad = GradBuf::zeros_like(weights);
    let ce = batch_gradient(arch, weights, cfg, data, batch, &mut grad)?;
    apply_step(weights, opt, &grad, settings);
    Ok(ce)
}

/// Slimmable step: accumulates batch gradients from every configuration in
/// the set (summed, not averaged), then applies one step. Returns the
/// per-configuration losses.
pub fn slimmable_train_step(
    arch: &ArchitectureSpec,
    weights: &mut Weights,
    opt: &mut SgdMomentum,
    cfgs: &[NetworkConfig],
    data: &Dataset,
    batch: &[usize],
    settings: &TrainSettings,
) -> Result<Vec<f64>> {
    settings.validate()?;
    if cfgs.is_empty() {
        return Err(Error::InvalidInput(
            "slimmable step needs at least one configuration".into(),
        ));
    }
    let mut grad = GradBuf::zeros_like(weights);
    let mut losses = Vec::with_capacity(cfgs.len());
    for cfg in cfgs {
        losses.push(batch_gradient(arch, weights, Some(cfg), data, batch, &mut grad)?);
    }
    apply_step(weights, opt, &grad, settings);
    Ok(losses)
}

/// Trains `epochs` passes over the selection under one fixed configuration.
/// Returns the mean batch loss of the final epoch.
#[allow(clippy::too_many_arguments)]
pub fn train_epochs(
    arch: &ArchitectureSpec,
    weights: &mut Weights,
    opt: &mut SgdMomentum,
    cfg: Option<&NetworkConfig>,
    data: &Dataset,
    selection: Selection,
    epochs: usize,
    settings: &TrainSettings,
) -> Result<f64> {
    let batches = data.batches(selection, settings.batch_size);
    if batches.is_empty() {
        return Err(Error::InvalidInput("selection holds no samples".into()));
    }
    let mut last = 0.0;
    for _ in 0..epochs {
        let mut sum = 0.0;
        for batch in &batches {
            sum += train_step(arch, weights, opt, cfg, data, batch, settings)?;
        }
        last = sum / batches.len() as f64;
    }
    Ok(last)
}

/// Trains a private copy of the weights under `cfg` for `epochs` epochs;
/// the originals stay untouched.
#[allow(clippy::too_many_arguments)]
pub fn fine_tune(
    arch: &ArchitectureSpec,
    weights: &Weights,
    cfg: &NetworkConfig,
    data: &Dataset,
    selection: Selection,
    epochs: usize,
    settings: &TrainSettings,
) -> Result<Weights> {
    let mut copy = weights.clone();
    if epochs == 0 {
        return Ok(copy);
    }
    let mut opt = SgdMomentum::new(&copy);
    train_epochs(arch, &mut copy, &mut opt, Some(cfg), data, selection, epochs, settings)?;
    Ok(copy)
}

/// Deterministic full-selection pass: (mean cross-entropy, accuracy).
/// Argmax ties resolve to the lowest class index.
pub fn evaluate(
    arch: &ArchitectureSpec,
    weights: &Weights,
    cfg: Option<&NetworkConfig>,
    data: &Dataset,
    selection: Selection,
) -> Result<(f64, f64)> {
    let indices = data.indices(selection);
    if indices.is_empty() {
        return Err(Error::InvalidInput("selection holds no samples".into()));
    }
    let logits = forward(arch, weights, cfg, data, &indices)?;
    let labels: Vec<usize> = indices.iter().map(|&i| data.label(i)).collect();
    let ce = cross_entropy(&logits, &labels);
    let correct = logits
        .iter()
        .zip(&labels)
        .filter(|(row, &label)| {
            let mut best = 0usize;
            for (c, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = c;
                }
            }
            best == label
        })
        .count();
    Ok((ce, correct as f64 / labels.len() as f64))
}
