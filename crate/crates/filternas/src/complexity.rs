//! Arithmetic-complexity metrics: bit-operation (BOP) counts for
//! mixed-precision layers, multiply-accumulate (MAC) counts for pruned
//! layers, parameter memory fetch cost, and the complexity loss built on
//! the ratio against a target configuration.
//!
//! Group sizes are carried as reals so that the same formulas evaluate both
//! integral configurations and expected (fractional) operation counts. The
//! accumulator width is kept real-valued: it feeds a continuous complexity
//! estimate, not a hardware register spec.

use serde::{Deserialize, Serialize};

use crate::arch::{ArchitectureSpec, LayerConfig, LayerSpec, NetworkConfig, OperationSet};
use crate::error::{Error, Result};
use crate::sigma::Sigma;

/// Knobs for the complexity metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ComplexityOptions {
    /// Add the parameter fetch cost to the network total.
    pub include_memory: bool,
    /// Activation bitwidth assumed for the raw network input.
    pub input_bits: u32,
    /// Weight bitwidth assumed for pruning-mode parameters.
    pub pruning_weight_bits: u32,
}

impl Default for ComplexityOptions {
    fn default() -> Self {
        Self {
            include_memory: true,
            input_bits: 8,
            pruning_weight_bits: 8,
        }
    }
}

/// Complexity of one configuration against a target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityReport {
    /// BOPs (quantization) or MACs (pruning) per layer.
    pub per_layer: Vec<f64>,
    /// Parameter fetch cost in bits (0 when disabled).
    pub memory_cost: f64,
    /// Sum of per-layer cost plus memory cost when enabled.
    pub total: f64,
    pub target_total: f64,
    /// total / target_total.
    pub ratio: f64,
}

/// Channel groups feeding a layer: (channel count, activation bits) per
/// group. Counts are real-valued to admit expected configurations.
#[derive(Debug, Clone, PartialEq)]
pub struct InputGroups {
    groups: Vec<(f64, u32)>,
}

impl InputGroups {
    /// A single group, e.g. the unquantized network input.
    pub fn single(channels: f64, bits: u32) -> Result<Self> {
        if channels <= 0.0 {
            return Err(Error::InvalidInput(
                "input group needs a positive channel count".into(),
            ));
        }
        Ok(Self {
            groups: vec![(channels, bits)],
        })
    }

    /// Groups induced by the previous layer's configuration.
    pub fn from_layer(prev: &LayerSpec, cfg: &LayerConfig) -> Result<Self> {
        cfg.validate(prev)?;
        let counts = cfg.counts().ok_or_else(|| {
            Error::InvalidConfig("input groups require a quantization configuration".into())
        })?;
        let real: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
        Self::from_real_counts(prev, &real)
    }

    /// Groups from real-valued per-operation counts of the previous layer.
    pub fn from_real_counts(prev: &LayerSpec, counts: &[f64]) -> Result<Self> {
        let ops = prev.ops.quant_ops().ok_or_else(|| {
            Error::InvalidConfig("input groups require a quantization layer".into())
        })?;
        if counts.len() != ops.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} counts for {} operations",
                counts.len(),
                ops.len()
            )));
        }
        if counts.iter().any(|&c| c < 0.0) {
            return Err(Error::InvalidConfig("negative group count".into()));
        }
        let total: f64 = counts.iter().sum();
        if (total - prev.filters as f64).abs() > 1e-6 * prev.filters as f64 {
            return Err(Error::InvalidConfig(format!(
                "group counts sum to {total}, expected {}",
                prev.filters
            )));
        }
        Ok(Self {
            groups: counts
                .iter()
                .zip(ops)
                .map(|(&c, op)| (c, op.activation_bits))
                .collect(),
        })
    }

    fn channel_total(&self) -> f64 {
        self.groups.iter().map(|(c, _)| c).sum()
    }
}

/// Closed-form per-pixel BOP count of a layer whose filters all share one
/// bitwidth pair:
/// `out * in * k^2 * (b_a * b_w + b_a + b_w + log2(in * k^2))`.
pub fn homogeneous_layer_bops(out_c: usize, in_c: usize, kernel: usize, b_a: u32, b_w: u32) -> f64 {
    let (m, n, k) = (out_c as f64, in_c as f64, kernel as f64);
    let (ba, bw) = (f64::from(b_a), f64::from(b_w));
    m * n * k * k * (ba * bw + ba + bw + (n * k * k).log2())
}

/// Accumulator width for a filter with `weight_bits`-bit weights reading
/// the given input groups through a `kernel x kernel` window:
/// `b_w + log2(k^2 * sum_g count_g * 2^{b_a_g})`.
pub fn accumulator_width(input: &InputGroups, weight_bits: u32, kernel: usize) -> Result<f64> {
    let k2 = (kernel * kernel) as f64;
    let weighted: f64 = input
        .groups
        .iter()
        .map(|&(count, bits)| count * f64::from(bits).exp2())
        .sum();
    if weighted <= 0.0 {
        return Err(Error::InvalidInput(
            "accumulator width needs at least one nonzero input group".into(),
        ));
    }
    Ok(f64::from(weight_bits) + (k2 * weighted).log2())
}

/// Filter-wise BOP count of one layer under real-valued output group sizes.
///
/// For each output group `t` with weight bits `b_w`, the single-pixel cost
/// is `k^2 * (in_channels * accumulator_width + sum_g count_g * b_a_g * b_w)`;
/// the layer total weights each group's cost by its size and multiplies by
/// the output area.
pub fn layer_bops_real(layer: &LayerSpec, input: &InputGroups, out_counts: &[f64]) -> Result<f64> {
    let ops = layer.ops.quant_ops().ok_or_else(|| {
        Error::InvalidConfig("BOP count requires a quantization layer".into())
    })?;
    if out_counts.len() != ops.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} output counts for {} operations",
            out_counts.len(),
            ops.len()
        )));
    }
    if out_counts.iter().any(|&c| c < 0.0) {
        return Err(Error::InvalidConfig("negative group count".into()));
    }
    let out_total: f64 = out_counts.iter().sum();
    if (out_total - layer.filters as f64).abs() > 1e-6 * layer.filters as f64 {
        return Err(Error::InvalidConfig(format!(
            "output counts sum to {out_total}, layer has {} filters",
            layer.filters
        )));
    }
    if (input.channel_total() - layer.in_channels as f64).abs()
        > 1e-6 * layer.in_channels as f64
    {
        return Err(Error::ShapeMismatch(format!(
            "input groups cover {} channels, layer expects {}",
            input.channel_total(),
            layer.in_channels
        )));
    }

    let k2 = (layer.kernel * layer.kernel) as f64;
    let area = (layer.out_height * layer.out_width) as f64;
    let c_in = layer.in_channels as f64;
    let mut total = 0.0;
    for (op, &count) in ops.iter().zip(out_counts) {
        if count == 0.0 {
            continue;
        }
        let acc = accumulator_width(input, op.weight_bits, layer.kernel)?;
        let mults: f64 = input
            .groups
            .iter()
            .map(|&(c, bits)| c * f64::from(bits) * f64::from(op.weight_bits))
            .sum();
        let per_pixel = k2 * (c_in * acc + mults);
        total += count * per_pixel;
    }
    Ok(area * total)
}

/// Filter-wise BOP count of one layer for an integral configuration.
pub fn layer_bops(layer: &LayerSpec, input: &InputGroups, out_cfg: &LayerConfig) -> Result<f64> {
    out_cfg.validate(layer)?;
    let counts = out_cfg.counts().ok_or_else(|| {
        Error::InvalidConfig("BOP count requires a quantization configuration".into())
    })?;
    let real: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    layer_bops_real(layer, input, &real)
}

/// MAC count of a layer executing at the given widths:
/// `in * out * k^2 * H * W`.
pub fn layer_macs(layer: &LayerSpec, in_filters: usize, out_filters: usize) -> f64 {
    in_filters as f64
        * out_filters as f64
        * (layer.kernel * layer.kernel) as f64
        * (layer.out_height * layer.out_width) as f64
}

/// Parameter fetch cost in bits: every parameter fetched once, at its
/// group's weight bitwidth (quantization) or the default weight bitwidth
/// over active parameters (pruning). The classifier is excluded; it is
/// constant across configurations.
pub fn memory_fetch_cost(
    arch: &ArchitectureSpec,
    cfg: &NetworkConfig,
    opts: &ComplexityOptions,
) -> Result<f64> {
    cfg.validate(arch)?;
    let mut total = 0.0;
    let mut prev_active = arch.input_shape.0 as f64;
    for (layer, layer_cfg) in arch.layers.iter().zip(&cfg.per_layer) {
        let k2 = (layer.kernel * layer.kernel) as f64;
        match (&layer.ops, layer_cfg) {
            (OperationSet::Quantization(ops), LayerConfig::Quant(counts)) => {
                let params_per_filter = layer.in_channels as f64 * k2;
                for (op, &count) in ops.iter().zip(counts) {
                    total += count as f64 * params_per_filter * f64::from(op.weight_bits);
                }
            }
            (OperationSet::Pruning, LayerConfig::Prune(a)) => {
                let active = (*a + 1) as f64;
                total += active * prev_active * k2 * f64::from(opts.pruning_weight_bits);
                prev_active = active;
            }
            _ => unreachable!("validated configuration"),
        }
    }
    Ok(total)
}

/// Per-layer costs, memory cost, and the network total for a configuration.
pub fn network_total(
    arch: &ArchitectureSpec,
    cfg: &NetworkConfig,
    opts: &ComplexityOptions,
) -> Result<(Vec<f64>, f64, f64)> {
    cfg.validate(arch)?;
    let per_layer = if arch.is_quantization() {
        let mut input = InputGroups::single(arch.input_shape.0 as f64, opts.input_bits)?;
        let mut out = Vec::with_capacity(arch.layers.len());
        for (layer, layer_cfg) in arch.layers.iter().zip(&cfg.per_layer) {
            out.push(layer_bops(layer, &input, layer_cfg)?);
            input = InputGroups::from_layer(layer, layer_cfg)?;
        }
        out
    } else {
        let mut prev = arch.input_shape.0;
        let mut out = Vec::with_capacity(arch.layers.len());
        for (layer, layer_cfg) in arch.layers.iter().zip(&cfg.per_layer) {
            let active = layer_cfg.active_filters().expect("validated pruning config");
            out.push(layer_macs(layer, prev, active));
            prev = active;
        }
        out
    };
    let memory = if opts.include_memory {
        memory_fetch_cost(arch, cfg, opts)?
    } else {
        0.0
    };
    let total = per_layer.iter().sum::<f64>() + memory;
    Ok((per_layer, memory, total))
}

/// BOP total for real-valued (expected) per-operation counts, chained
/// through the network exactly like [`network_total`].
pub fn network_bops_expected(
    arch: &ArchitectureSpec,
    counts: &[Vec<f64>],
    opts: &ComplexityOptions,
) -> Result<f64> {
    if !arch.is_quantization() {
        return Err(Error::InvalidConfig(
            "expected BOP totals apply to quantization architectures".into(),
        ));
    }
    if counts.len() != arch.layers.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} count vectors for {} layers",
            counts.len(),
            arch.layers.len()
        )));
    }
    let mut input = InputGroups::single(arch.input_shape.0 as f64, opts.input_bits)?;
    let mut total = 0.0;
    for (i, (layer, layer_counts)) in arch.layers.iter().zip(counts).enumerate() {
        total += layer_bops_real(layer, &input, layer_counts)?;
        if opts.include_memory {
            let ops = layer.ops.quant_ops().expect("quantization layer");
            let ppf = layer.in_channels as f64 * (layer.kernel * layer.kernel) as f64;
            for (op, &c) in ops.iter().zip(layer_counts) {
                total += c * ppf * f64::from(op.weight_bits);
            }
        }
        if i + 1 < arch.layers.len() {
            input = InputGroups::from_real_counts(layer, layer_counts)?;
        }
    }
    Ok(total)
}

/// Builds the full complexity report of `cfg` against `target`.
pub fn complexity_report(
    arch: &ArchitectureSpec,
    cfg: &NetworkConfig,
    target: &NetworkConfig,
    opts: &ComplexityOptions,
) -> Result<ComplexityReport> {
    let (per_layer, memory_cost, total) = network_total(arch, cfg, opts)?;
    let (_, _, target_total) = network_total(arch, target, opts)?;
    Ok(ComplexityReport {
        per_layer,
        memory_cost,
        total,
        target_total,
        ratio: total / target_total,
    })
}

/// Complexity loss: `sigma(total / target_total)`.
pub fn complexity_loss(
    arch: &ArchitectureSpec,
    cfg: &NetworkConfig,
    target: &NetworkConfig,
    sigma: Sigma,
    opts: &ComplexityOptions,
) -> Result<f64> {
    let report = complexity_report(arch, cfg, target, opts)?;
    Ok(sigma.apply(report.ratio))
}
