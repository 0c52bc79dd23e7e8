//! Builders and assertions shared across module tests.

use crate::arch::{ArchitectureSpec, BitWidths, LayerSpec, OperationSet};

pub fn quant_layer(filters: usize, in_channels: usize, ops: &[(u32, u32)]) -> LayerSpec {
    LayerSpec {
        filters,
        in_channels,
        kernel: 3,
        out_height: 8,
        out_width: 8,
        ops: OperationSet::Quantization(ops.iter().map(|&(w, a)| BitWidths::new(w, a)).collect()),
    }
}

pub fn prune_layer(filters: usize, in_channels: usize) -> LayerSpec {
    LayerSpec {
        filters,
        in_channels,
        kernel: 3,
        out_height: 8,
        out_width: 8,
        ops: OperationSet::Pruning,
    }
}

/// Stack of quantization layers chained over one input channel.
pub fn quant_arch(filters: &[usize], ops: &[(u32, u32)]) -> ArchitectureSpec {
    let mut layers = Vec::new();
    let mut in_c = 1;
    for &f in filters {
        layers.push(quant_layer(f, in_c, ops));
        in_c = f;
    }
    ArchitectureSpec {
        layers,
        num_classes: 4,
        input_shape: (1, 8, 8),
    }
}

/// Stack of pruning layers chained over one input channel.
pub fn prune_arch(filters: &[usize]) -> ArchitectureSpec {
    let mut layers = Vec::new();
    let mut in_c = 1;
    for &f in filters {
        layers.push(prune_layer(f, in_c));
        in_c = f;
    }
    ArchitectureSpec {
        layers,
        num_classes: 4,
        input_shape: (1, 8, 8),
    }
}

/// |a - b| <= max(abs_floor, rel * max(|a|, |b|))
pub fn close(a: f64, b: f64, rel: f64, abs_floor: f64) -> bool {
    let diff = (a - b).abs();
    diff <= abs_floor.max(rel * a.abs().max(b.abs()))
}

#[track_caller]
pub fn assert_close(a: f64, b: f64, rel: f64, abs_floor: f64) {
    assert!(
        close(a, b, rel, abs_floor),
        "{a} vs {b} (diff {}, rel tol {rel}, abs floor {abs_floor})",
        (a - b).abs()
    );
}
