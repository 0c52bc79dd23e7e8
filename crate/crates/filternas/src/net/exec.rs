//! Configured execution of the network: plan construction, forward passes,
//! and manual backpropagation with straight-through quantizer gradients.
//!
//! Convolutions are stride-1 with zero padding that preserves spatial size,
//! so every layer's declared output dims must equal the input dims. Under a
//! quantization configuration each filter's weights are quantized at its
//! group's weight bitwidth before the convolution and each group's
//! activations are quantized at its activation bitwidth after the ReLU.
//! Under a pruning configuration only the leading active filters compute
//! and the next layer consumes only those channels.

use crate::arch::{filter_assignment, ArchitectureSpec, LayerConfig, NetworkConfig, OperationSet};
use crate::error::{Error, Result};
use crate::net::quantize::quantize_in_place;
use crate::net::{GradBuf, Weights};

/// Channel group sharing one activation bitwidth: (start, len, bits).
type ActGroup = (usize, usize, u32);

pub(crate) struct LayerPlan {
    pub in_c: usize,
    pub out_c: usize,
    pub k: usize,
    pub h: usize,
    pub w: usize,
    /// Quantized weight tensor (full shape) when the layer runs quantized.
    pub qweights: Option<Vec<f64>>,
    /// Post-ReLU activation quantization groups, quantization mode only.
    pub act_groups: Option<Vec<ActGroup>>,
}

/// Everything needed to run the network under one configuration.
pub(crate) struct ExecPlan {
    pub layers: Vec<LayerPlan>,
    /// Classifier input width (active filters of the last layer).
    pub features: usize,
}

/// Builds the execution plan for `cfg`; `None` runs the full-width float
/// network.
pub(crate) fn build_plan(
    arch: &ArchitectureSpec,
    weights: &Weights,
    cfg: Option<&NetworkConfig>,
) -> Result<ExecPlan> {
    arch.validate()?;
    weights.check_shapes(arch)?;
    if let Some(cfg) = cfg {
        cfg.validate(arch)?;
    }
    let (_, in_h, in_w) = arch.input_shape;

    let mut layers = Vec::with_capacity(arch.layers.len());
    let mut active_in = arch.input_shape.0;
    for (idx, layer) in arch.layers.iter().enumerate() {
        if layer.out_height != in_h || layer.out_width != in_w {
            return Err(Error::ShapeMismatch(format!(
                "layer {idx} declares {}x{} output but same-size convolution gives {in_h}x{in_w}",
                layer.out_height, layer.out_width
            )));
        }
        let conv = &weights.conv[idx];
        let mut plan = LayerPlan {
            in_c: active_in,
            out_c: layer.filters,
            k: layer.kernel,
            h: in_h,
            w: in_w,
            qweights: None,
            act_groups: None,
        };
        match cfg.map(|c| &c.per_layer[idx]) {
            Some(layer_cfg @ LayerConfig::Quant(counts)) => {
                let ops = match &layer.ops {
                    OperationSet::Quantization(ops) => ops,
                    OperationSet::Pruning => unreachable!("validated configuration"),
                };
                let assignment = filter_assignment(layer, layer_cfg)?;
                // Quantize each filter's weights at its group's bitwidth.
                let mut q = conv.w.clone();
                let per_filter = conv.in_c * conv.k * conv.k;
                for (f, &op) in assignment.iter().enumerate() {
                    let slice = &mut q[f * per_filter..(f + 1) * per_filter];
                    quantize_in_place(slice, ops[op].weight_bits);
                }
                plan.qweights = Some(q);
                let mut groups = Vec::new();
                let mut start = 0usize;
                for (op, &count) in ops.iter().zip(counts) {
                    if count > 0 {
                        groups.push((start, count, op.activation_bits));
                        start += count;
                    }
                }
                plan.act_groups = Some(groups);
            }
            Some(LayerConfig::Prune(a)) => {
                plan.out_c = a + 1;
            }
            None => {}
        }
        active_in = plan.out_c;
        layers.push(plan);
    }
    Ok(ExecPlan {
        layers,
        features: active_in,
    })
}

/// Per-sample forward state kept for backpropagation.
pub(crate) struct SampleTrace {
    /// Input consumed by each convolution (active channels only).
    pub layer_inputs: Vec<Vec<f64>>,
    /// Pre-activation (post scale) of each layer.
    pub pre: Vec<Vec<f64>>,
    /// Mean-pooled features fed to the classifier.
    pub pooled: Vec<f64>,
    /// Softmax of the logits.
    pub probs: Vec<f64>,
}

#[allow(clippy::too_many_arguments)]
fn conv_same(
    x: &[f64],
    weights: &[f64],
    bias: &[f64],
    full_in_c: usize,
    in_c: usize,
    out_c: usize,
    k: usize,
    h: usize,
    w: usize,
) -> Vec<f64> {
    let pad = (k - 1) / 2;
    let mut y = vec![0.0; out_c * h * w];
    for f in 0..out_c {
        let wf = &weights[f * full_in_c * k * k..];
        for oy in 0..h {
            for ox in 0..w {
                let mut acc = bias[f];
                for ci in 0..in_c {
                    let xc = &x[ci * h * w..(ci + 1) * h * w];
                    let wfc = &wf[ci * k * k..(ci + 1) * k * k];
                    for ky in 0..k {
                        let iy = oy + ky;
                        if iy < pad || iy >= h + pad {
                            continue;
                        }
                        let iy = iy - pad;
                        for kx in 0..k {
                            let ix = ox + kx;
                            if ix < pad || ix >= w + pad {
                                continue;
                            }
                            let ix = ix - pad;
                            acc += wfc[ky * k + kx] * xc[iy * w + ix];
                        }
                    }
                }
                y[f * h * w + oy * w + ox] = acc;
            }
        }
    }
    y
}

/// Runs one sample through the plan. Returns logits, optionally recording
/// the intermediate state needed for backpropagation.
pub(crate) fn forward_one(
    plan: &ExecPlan,
    weights: &Weights,
    input: &[f64],
    record: bool,
) -> (Vec<f64>, Option<SampleTrace>) {
    let mut x = input.to_vec();
    let mut layer_inputs = Vec::new();
    let mut pres = Vec::new();
    for (idx, lp) in plan.layers.iter().enumerate() {
        let conv = &weights.conv[idx];
        let eff_w = lp.qweights.as_deref().unwrap_or(&conv.w);
        let mut pre = conv_same(
            &x, eff_w, &conv.b, conv.in_c, lp.in_c, lp.out_c, lp.k, lp.h, lp.w,
        );
        let scale = weights.act_scale[idx];
        if scale != 1.0 {
            for v in pre.iter_mut() {
                *v *= scale;
            }
        }
        // ReLU; non-finite pre-activations propagate (inf * 0 = NaN) so
        // divergence trips the loss check instead of being zeroed away.
        let mut post: Vec<f64> = pre
            .iter()
            .map(|&v| if v > 0.0 { v } else { v * 0.0 })
            .collect();
        if let Some(groups) = &lp.act_groups {
            let area = lp.h * lp.w;
            for &(start, len, bits) in groups {
                quantize_in_place(&mut post[start * area..(start + len) * area], bits);
            }
        }
        if record {
            layer_inputs.push(x);
            pres.push(pre);
        }
        x = post;
    }

    // Global average pool, then the linear classifier over active features.
    let last = plan.layers.last().expect("validated architecture");
    let area = (last.h * last.w) as f64;
    let pooled: Vec<f64> = (0..plan.features)
        .map(|f| x[f * last.h * last.w..(f + 1) * last.h * last.w].iter().sum::<f64>() / area)
        .collect();
    let mut logits = weights.classifier_b.clone();
    for (c, logit) in logits.iter_mut().enumerate() {
        let row = &weights.classifier_w[c * weights.features..];
        for (f, &p) in pooled.iter().enumerate() {
            *logit += row[f] * p;
        }
    }

    let trace = if record {
        let probs = softmax(&logits);
        Some(SampleTrace {
            layer_inputs,
            pre: pres,
            pooled,
            probs,
        })
    } else {
        None
    };
    (logits, trace)
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Backpropagates the cross-entropy of one sample, scaled by `weight`
/// (1 / batch size for a mean), into `grad`. Quantizers pass gradients
/// through unchanged; only active slices are touched.
pub(crate) fn backward_one(
    plan: &ExecPlan,
    weights: &Weights,
    trace: &SampleTrace,
    label: usize,
    weight: f64,
    grad: &mut GradBuf,
) {
    let classes = weights.classes;
    let mut dlogits: Vec<f64> = trace.probs.clone();
    dlogits[label] -= 1.0;
    for d in dlogits.iter_mut() {
        *d *= weight;
    }

    // Classifier.
    let mut dpooled = vec![0.0; plan.features];
    for (c, &dl) in dlogits.iter().enumerate().take(classes) {
        grad.classifier_b[c] += dl;
        let row = c * weights.features;
        for (f, d) in dpooled.iter_mut().enumerate() {
            grad.classifier_w[row + f] += dl * trace.pooled[f];
            *d += dl * weights.classifier_w[row + f];
        }
    }

    // Spread the pooled gradient uniformly over spatial positions.
    let last = plan.layers.last().expect("validated architecture");
    let area = last.h * last.w;
    let mut dpost = vec![0.0; plan.features * area];
    for f in 0..plan.features {
        let g = dpooled[f] / area as f64;
        for v in dpost[f * area..(f + 1) * area].iter_mut() {
            *v += g;
        }
    }

    for idx in (0..plan.layers.len()).rev() {
        let lp = &plan.layers[idx];
        let conv = &weights.conv[idx];
        let eff_w = lp.qweights.as_deref().unwrap_or(&conv.w);
        let pre = &trace.pre[idx];
        let x = &trace.layer_inputs[idx];
        let scale = weights.act_scale[idx];
        let pad = (lp.k - 1) / 2;

        // Through activation quantization (pass-through), ReLU, and scale.
        let mut dconv = dpost;
        for (d, &p) in dconv.iter_mut().zip(pre.iter()) {
            if p <= 0.0 {
                *d = 0.0;
            } else if scale != 1.0 {
                *d *= scale;
            }
        }

        let layer_grad = &mut grad.conv[idx];
        let (gw, gb) = (&mut layer_grad.w, &mut layer_grad.b);
        let mut dx = vec![0.0; lp.in_c * lp.h * lp.w];
        for f in 0..lp.out_c {
            let dyf = &dconv[f * lp.h * lp.w..(f + 1) * lp.h * lp.w];
            gb[f] += dyf.iter().sum::<f64>();
            let wbase = f * conv.in_c * lp.k * lp.k;
            for ci in 0..lp.in_c {
                let xc = &x[ci * lp.h * lp.w..(ci + 1) * lp.h * lp.w];
                let dxc = &mut dx[ci * lp.h * lp.w..(ci + 1) * lp.h * lp.w];
                let wfc = &eff_w[wbase + ci * lp.k * lp.k..];
                let gfc = &mut gw[wbase + ci * lp.k * lp.k..wbase + (ci + 1) * lp.k * lp.k];
                for oy in 0..lp.h {
                    for ox in 0..lp.w {
                        let dy = dyf[oy * lp.w + ox];
                        if dy == 0.0 {
                            continue;
                        }
                        for ky in 0..lp.k {
                            let iy = oy + ky;
                            if iy < pad || iy >= lp.h + pad {
                                continue;
                            }
                            let iy = iy - pad;
                            for kx in 0..lp.k {
                                let ix = ox + kx;
                                if ix < pad || ix >= lp.w + pad {
                                    continue;
                                }
                                let ix = ix - pad;
                                let xv = xc[iy * lp.w + ix];
                                gfc[ky * lp.k + kx] += dy * xv;
                                dxc[iy * lp.w + ix] += dy * wfc[ky * lp.k + kx];
                            }
                        }
                    }
                }
            }
        }
        dpost = dx;
    }
}
