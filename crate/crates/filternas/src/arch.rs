//! Network architecture description and the compression configuration space
//! it induces.
//!
//! An architecture is a plain feed-forward stack of convolutional layers.
//! Each layer carries an operation set: either a menu of weight/activation
//! bitwidth pairs (quantization) or the implicit menu of active filter
//! counts (pruning). A configuration assigns operations to filters per
//! layer, by operation counts in the quantization case and by an active
//! width in the pruning case.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Weight/activation bitwidth pair for one quantization operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BitWidths {
    pub weight_bits: u32,
    pub activation_bits: u32,
}

impl BitWidths {
    pub fn new(weight_bits: u32, activation_bits: u32) -> Self {
        Self {
            weight_bits,
            activation_bits,
        }
    }
}

/// The menu of per-filter compression choices for a layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum OperationSet {
    /// An explicit, ordered list of bitwidth pairs.
    Quantization(Vec<BitWidths>),
    /// Active filter counts `1..=filters`; no explicit list is stored.
    Pruning,
}

impl OperationSet {
    pub fn is_quantization(&self) -> bool {
        matches!(self, OperationSet::Quantization(_))
    }

    /// Number of explicit operations (quantization only).
    pub fn num_ops(&self) -> Option<usize> {
        match self {
            OperationSet::Quantization(ops) => Some(ops.len()),
            OperationSet::Pruning => None,
        }
    }

    pub fn quant_ops(&self) -> Option<&[BitWidths]> {
        match self {
            OperationSet::Quantization(ops) => Some(ops),
            OperationSet::Pruning => None,
        }
    }

    fn validate(&self) -> Result<()> {
        if let OperationSet::Quantization(ops) = self {
            if ops.is_empty() {
                return Err(Error::InvalidArch(
                    "quantization operation set is empty".into(),
                ));
            }
            for (i, op) in ops.iter().enumerate() {
                for bits in [op.weight_bits, op.activation_bits] {
                    if !(1..=32).contains(&bits) {
                        return Err(Error::InvalidArch(format!(
                            "operation {i} has bitwidth {bits}, outside 1..=32"
                        )));
                    }
                }
                if ops[..i].contains(op) {
                    return Err(Error::InvalidArch(format!(
                        "duplicate operation ({}, {}) in set",
                        op.weight_bits, op.activation_bits
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Static description of one convolutional layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    /// Number of filters (output channels).
    pub filters: usize,
    /// Input channels; must equal the previous layer's filter count.
    pub in_channels: usize,
    /// Square kernel side.
    pub kernel: usize,
    /// Output spatial dims, used by the complexity metrics.
    pub out_height: usize,
    pub out_width: usize,
    pub ops: OperationSet,
}

impl LayerSpec {
    fn validate(&self, index: usize) -> Result<()> {
        if self.filters < 1
            || self.in_channels < 1
            || self.kernel < 1
            || self.out_height < 1
            || self.out_width < 1
        {
            return Err(Error::InvalidArch(format!(
                "layer {index} has a zero-sized dimension"
            )));
        }
        self.ops.validate()
    }
}

/// Static description of a layered convolutional network; defines the
/// search space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchitectureSpec {
    pub layers: Vec<LayerSpec>,
    pub num_classes: usize,
    /// (channels, height, width) of the input.
    pub input_shape: (usize, usize, usize),
}

impl ArchitectureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::InvalidArch("architecture has no layers".into()));
        }
        if self.num_classes < 2 {
            return Err(Error::InvalidArch("need at least two classes".into()));
        }
        let quant = self.layers[0].ops.is_quantization();
        let mut in_channels = self.input_shape.0;
        for (i, layer) in self.layers.iter().enumerate() {
            layer.validate(i)?;
            if layer.ops.is_quantization() != quant {
                return Err(Error::InvalidArch(
                    "all layers must share one compression mode".into(),
                ));
            }
            if layer.in_channels != in_channels {
                return Err(Error::InvalidArch(format!(
                    "layer {i} expects {} input channels but receives {}",
                    layer.in_channels, in_channels
                )));
            }
            in_channels = layer.filters;
        }
        Ok(())
    }

    /// True when every layer uses an explicit bitwidth menu.
    pub fn is_quantization(&self) -> bool {
        self.layers[0].ops.is_quantization()
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }
}

/// Assignment of compression operations to the filters of one layer.
///
/// Serialized untagged: a JSON array means per-operation counts, a bare
/// integer means a sampled width value (active filter count minus one).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LayerConfig {
    /// Per-operation filter counts, summing to the layer's filter total.
    Quant(Vec<usize>),
    /// Sampled value `a` in `0..filters`; the active filter count is `a + 1`.
    Prune(usize),
}

impl LayerConfig {
    /// Active filter count for pruning configurations.
    pub fn active_filters(&self) -> Option<usize> {
        match self {
            LayerConfig::Prune(a) => Some(a + 1),
            LayerConfig::Quant(_) => None,
        }
    }

    pub fn counts(&self) -> Option<&[usize]> {
        match self {
            LayerConfig::Quant(c) => Some(c),
            LayerConfig::Prune(_) => None,
        }
    }

    pub fn validate(&self, layer: &LayerSpec) -> Result<()> {
        match (self, &layer.ops) {
            (LayerConfig::Quant(counts), OperationSet::Quantization(ops)) => {
                if counts.len() != ops.len() {
                    return Err(Error::InvalidConfig(format!(
                        "{} counts for {} operations",
                        counts.len(),
                        ops.len()
                    )));
                }
                let total: usize = counts.iter().sum();
                if total != layer.filters {
                    return Err(Error::InvalidConfig(format!(
                        "counts sum to {total}, layer has {} filters",
                        layer.filters
                    )));
                }
                Ok(())
            }
            (LayerConfig::Prune(a), OperationSet::Pruning) => {
                if *a >= layer.filters {
                    return Err(Error::InvalidConfig(format!(
                        "sampled value {a} outside 0..{}",
                        layer.filters
                    )));
                }
                Ok(())
            }
            _ => Err(Error::InvalidConfig(
                "configuration variant does not match the layer's operation set".into(),
            )),
        }
    }
}

/// Assignment of operations to filters across the whole network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub per_layer: Vec<LayerConfig>,
}

impl NetworkConfig {
    pub fn new(per_layer: Vec<LayerConfig>) -> Self {
        Self { per_layer }
    }

    pub fn validate(&self, arch: &ArchitectureSpec) -> Result<()> {
        if self.per_layer.len() != arch.layers.len() {
            return Err(Error::InvalidConfig(format!(
                "{} layer configs for {} layers",
                self.per_layer.len(),
                arch.layers.len()
            )));
        }
        for (cfg, layer) in self.per_layer.iter().zip(&arch.layers) {
            cfg.validate(layer)?;
        }
        Ok(())
    }

    /// True when one operation (or one width ratio) covers every layer.
    pub fn is_homogeneous(&self, arch: &ArchitectureSpec) -> bool {
        match self.per_layer.first() {
            Some(LayerConfig::Quant(_)) => {
                let mut chosen: Option<usize> = None;
                for (cfg, layer) in self.per_layer.iter().zip(&arch.layers) {
                    let counts = match cfg.counts() {
                        Some(c) => c,
                        None => return false,
                    };
                    let mut nonzero = counts.iter().enumerate().filter(|(_, &c)| c > 0);
                    match (nonzero.next(), nonzero.next()) {
                        (Some((op, &c)), None) if c == layer.filters => match chosen {
                            None => chosen = Some(op),
                            Some(prev) if prev == op => {}
                            _ => return false,
                        },
                        _ => return false,
                    }
                }
                true
            }
            Some(LayerConfig::Prune(_)) => {
                // Equal width ratio across layers, compared exactly in
                // integers: n_i / C_i == n_j / C_j.
                let mut first: Option<(usize, usize)> = None;
                for (cfg, layer) in self.per_layer.iter().zip(&arch.layers) {
                    let n = match cfg.active_filters() {
                        Some(n) => n,
                        None => return false,
                    };
                    match first {
                        None => first = Some((n, layer.filters)),
                        Some((n0, c0)) => {
                            if n * c0 != n0 * layer.filters {
                                return false;
                            }
                        }
                    }
                }
                true
            }
            None => false,
        }
    }

    /// Compact stable identifier: operation counts joined by `-` within a
    /// layer and `_` across layers, or active filter counts for pruning.
    pub fn id(&self) -> String {
        self.per_layer
            .iter()
            .map(|cfg| match cfg {
                LayerConfig::Quant(counts) => counts
                    .iter()
                    .map(|c| c.to_string())
                    .collect::<Vec<_>>()
                    .join("-"),
                LayerConfig::Prune(a) => (a + 1).to_string(),
            })
            .collect::<Vec<_>>()
            .join("_")
    }
}

/// Selector for a homogeneous configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum HomogeneousTarget {
    /// Apply the operation at this index to every filter of every layer.
    OpIndex(usize),
    /// Keep `round(ratio * filters)` filters per layer, at least one.
    WidthRatio(f64),
}

/// Builds the homogeneous configuration selected by `which`.
pub fn make_homogeneous(arch: &ArchitectureSpec, which: HomogeneousTarget) -> Result<NetworkConfig> {
    let per_layer = arch
        .layers
        .iter()
        .map(|layer| match (which, &layer.ops) {
            (HomogeneousTarget::OpIndex(idx), OperationSet::Quantization(ops)) => {
                if idx >= ops.len() {
                    return Err(Error::InvalidConfig(format!(
                        "operation index {idx} outside 0..{}",
                        ops.len()
                    )));
                }
                let mut counts = vec![0usize; ops.len()];
                counts[idx] = layer.filters;
                Ok(LayerConfig::Quant(counts))
            }
            (HomogeneousTarget::WidthRatio(ratio), OperationSet::Pruning) => {
                if !(ratio > 0.0 && ratio <= 1.0) {
                    return Err(Error::InvalidConfig(format!(
                        "width ratio {ratio} outside (0, 1]"
                    )));
                }
                let count = ((ratio * layer.filters as f64).round() as usize)
                    .clamp(1, layer.filters);
                Ok(LayerConfig::Prune(count - 1))
            }
            _ => Err(Error::InvalidConfig(
                "homogeneous target does not match the architecture's mode".into(),
            )),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(NetworkConfig { per_layer })
}

/// Exact binomial coefficient in 128-bit arithmetic; errors on overflow.
fn binomial_u128(n: u128, k: u128) -> Option<u128> {
    let k = k.min(n - k.min(n));
    let mut result: u128 = 1;
    for i in 1..=k {
        // result = C(n - k + i, i): the running value stays integral, so
        // the division is exact.
        result = result.checked_mul(n - k + i)? / i;
    }
    Some(result)
}

/// Number of distinct configurations of one layer.
///
/// Counts compositions of the filter total over the operation menu in the
/// quantization case and the width support size in the pruning case, in
/// exact 128-bit arithmetic.
pub fn layer_config_count(layer: &LayerSpec) -> Result<u128> {
    match &layer.ops {
        OperationSet::Quantization(ops) => {
            let n = layer.filters as u128 + ops.len() as u128 - 1;
            let k = ops.len() as u128 - 1;
            binomial_u128(n, k).ok_or(Error::CountOverflow {
                filters: layer.filters,
                ops: ops.len(),
            })
        }
        OperationSet::Pruning => Ok(layer.filters as u128),
    }
}

/// Expands a quantization layer configuration into one operation index per
/// filter: the first `counts[0]` filters use operation 0, the next
/// `counts[1]` use operation 1, and so on.
pub fn filter_assignment(layer: &LayerSpec, cfg: &LayerConfig) -> Result<Vec<usize>> {
    cfg.validate(layer)?;
    let counts = cfg.counts().ok_or_else(|| {
        Error::InvalidConfig("filter assignment requires a quantization configuration".into())
    })?;
    let mut assignment = Vec::with_capacity(layer.filters);
    for (op, &count) in counts.iter().enumerate() {
        assignment.extend(std::iter::repeat_n(op, count));
    }
    Ok(assignment)
}
