//! Symmetric uniform quantizer with a straight-through gradient contract:
//! the rounding is treated as identity during backpropagation.

/// Quantizes to a symmetric uniform grid with `2^(bits-1) - 1` positive
/// levels: `scale = max|v| / levels` (scale 1 when all values are zero; the
/// denominator saturates at 1 for bits = 1), `out = round(v / scale) * scale`
/// with ties rounding away from zero.
pub fn quantize(values: &[f64], bits: u32) -> Vec<f64> {
    let mut out = values.to_vec();
    quantize_in_place(&mut out, bits);
    out
}

/// In-place variant of [`quantize`].
pub fn quantize_in_place(values: &mut [f64], bits: u32) {
    debug_assert!((1..=32).contains(&bits), "bitwidth {bits} outside 1..=32");
    let max_abs = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max_abs == 0.0 {
        return;
    }
    let levels = if bits <= 1 {
        1.0
    } else {
        ((1u64 << (bits - 1)) - 1) as f64
    };
    let scale = max_abs / levels;
    for v in values.iter_mut() {
        *v = (*v / scale).round() * scale;
    }
}
