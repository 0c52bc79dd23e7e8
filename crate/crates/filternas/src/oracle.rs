//! Brute-force ground truth on small instances: exhaustive configuration
//! enumeration, exact expected-loss gradients from the analytic mass
//! derivatives, and central finite differences for cross-checking.
//!
//! Enumeration order is fixed: layer configurations are listed in ascending
//! lexicographic order of their count vectors (widths ascending in the
//! pruning case), and network configurations iterate the per-layer lists in
//! row-major order with layer 0 most significant. Reductions use
//! compensated summation so results are stable to ~1e-12 regardless of
//! chunking.

use rayon::prelude::*;

use crate::arch::{layer_config_count, ArchitectureSpec, LayerConfig, LayerSpec, NetworkConfig};
use crate::complexity::{network_total, ComplexityOptions};
use crate::dist::{layer_pmf, AlphaParams};
use crate::error::{Error, Result};
use crate::util::KahanSum;

/// Default ceiling on enumerable configuration spaces.
pub const DEFAULT_GUARD: u128 = 1_000_000;

/// Every configuration of the network together with its probability.
#[derive(Debug, Clone)]
pub struct EnumeratedSpace {
    pub configs: Vec<NetworkConfig>,
    pub probs: Vec<f64>,
}

/// All configurations of one layer in ascending lexicographic order.
pub fn layer_configs(layer: &LayerSpec) -> Vec<LayerConfig> {
    match layer.ops.num_ops() {
        Some(num_ops) => {
            let mut out = Vec::new();
            let mut current = vec![0usize; num_ops];
            compositions(layer.filters, 0, &mut current, &mut out);
            out
        }
        None => (0..layer.filters).map(LayerConfig::Prune).collect(),
    }
}

fn compositions(remaining: usize, pos: usize, current: &mut Vec<usize>, out: &mut Vec<LayerConfig>) {
    if pos == current.len() - 1 {
        current[pos] = remaining;
        out.push(LayerConfig::Quant(current.clone()));
        return;
    }
    for value in 0..=remaining {
        current[pos] = value;
        compositions(remaining - value, pos + 1, current, out);
    }
}

/// Total number of network configurations, in exact arithmetic.
pub fn space_size(arch: &ArchitectureSpec) -> Result<u128> {
    let mut total: u128 = 1;
    for layer in &arch.layers {
        let n = layer_config_count(layer)?;
        total = total.checked_mul(n).ok_or(Error::CountOverflow {
            filters: layer.filters,
            ops: layer.ops.num_ops().unwrap_or(1),
        })?;
    }
    Ok(total)
}

fn guard_space(arch: &ArchitectureSpec, limit: u128) -> Result<Vec<Vec<LayerConfig>>> {
    let count = space_size(arch)?;
    if count > limit {
        return Err(Error::SpaceTooLarge { count, limit });
    }
    Ok(arch.layers.iter().map(layer_configs).collect())
}

/// Every network configuration in enumeration order, without probabilities.
pub fn enumerate_configs(arch: &ArchitectureSpec, limit: u128) -> Result<Vec<NetworkConfig>> {
    let per_layer = guard_space(arch, limit)?;
    let mut out = Vec::new();
    let mut stack: Vec<LayerConfig> = Vec::with_capacity(per_layer.len());
    cartesian(&per_layer, &mut stack, &mut out);
    Ok(out)
}

fn cartesian(lists: &[Vec<LayerConfig>], stack: &mut Vec<LayerConfig>, out: &mut Vec<NetworkConfig>) {
    if stack.len() == lists.len() {
        out.push(NetworkConfig::new(stack.clone()));
        return;
    }
    for cfg in &lists[stack.len()] {
        stack.push(cfg.clone());
        cartesian(lists, stack, out);
        stack.pop();
    }
}

/// Enumerates the whole space with attached probabilities.
pub fn enumerate_space(
    arch: &ArchitectureSpec,
    alpha: &AlphaParams,
    limit: u128,
) -> Result<EnumeratedSpace> {
    alpha.validate(arch)?;
    let index = SpaceIndex::build(arch, limit)?;
    let tables = index.pmf_tables(arch, alpha)?;
    let probs = index
        .memberships
        .iter()
        .map(|m| m.iter().enumerate().map(|(l, &i)| tables[l][i]).product())
        .collect();
    Ok(EnumeratedSpace {
        configs: index.configs,
        probs,
    })
}

/// Enumerated space with per-layer membership indices, so probability
/// tables can be recomputed cheaply for perturbed parameters.
struct SpaceIndex {
    layer_lists: Vec<Vec<LayerConfig>>,
    configs: Vec<NetworkConfig>,
    /// For each network configuration, the index of its layer configuration
    /// within each layer list.
    memberships: Vec<Vec<usize>>,
}

impl SpaceIndex {
    fn build(arch: &ArchitectureSpec, limit: u128) -> Result<Self> {
        let layer_lists = guard_space(arch, limit)?;
        let mut configs = Vec::new();
        let mut memberships = Vec::new();
        let mut stack: Vec<usize> = Vec::with_capacity(layer_lists.len());
        fn rec(
            lists: &[Vec<LayerConfig>],
            stack: &mut Vec<usize>,
            configs: &mut Vec<NetworkConfig>,
            memberships: &mut Vec<Vec<usize>>,
        ) {
            if stack.len() == lists.len() {
                let cfg = NetworkConfig::new(
                    stack
                        .iter()
                        .enumerate()
                        .map(|(l, &i)| lists[l][i].clone())
                        .collect(),
                );
                configs.push(cfg);
                memberships.push(stack.clone());
                return;
            }
            for i in 0..lists[stack.len()].len() {
                stack.push(i);
                rec(lists, stack, configs, memberships);
                stack.pop();
            }
        }
        rec(&layer_lists, &mut stack, &mut configs, &mut memberships);
        Ok(SpaceIndex {
            layer_lists,
            configs,
            memberships,
        })
    }

    fn pmf_tables(&self, arch: &ArchitectureSpec, alpha: &AlphaParams) -> Result<Vec<Vec<f64>>> {
        self.layer_lists
            .iter()
            .enumerate()
            .map(|(l, list)| {
                let probs = alpha.layer_probs(l);
                list.iter()
                    .map(|cfg| layer_pmf(&arch.layers[l], &probs, cfg))
                    .collect()
            })
            .collect()
    }

    fn expected(&self, tables: &[Vec<f64>], losses: &[f64]) -> f64 {
        let mut acc = KahanSum::new();
        for (m, &loss) in self.memberships.iter().zip(losses) {
            let p: f64 = m.iter().enumerate().map(|(l, &i)| tables[l][i]).product();
            acc.add(loss * p);
        }
        acc.value()
    }
}

fn evaluate_losses<F>(configs: &[NetworkConfig], loss_fn: F) -> Vec<f64>
where
    F: Fn(&NetworkConfig) -> f64 + Sync,
{
    configs.par_iter().map(&loss_fn).collect()
}

/// Exact expected value of `loss_fn` under the configuration distribution.
pub fn expected_loss_exhaustive<F>(
    arch: &ArchitectureSpec,
    alpha: &AlphaParams,
    loss_fn: F,
    limit: u128,
) -> Result<f64>
where
    F: Fn(&NetworkConfig) -> f64 + Sync,
{
    alpha.validate(arch)?;
    let index = SpaceIndex::build(arch, limit)?;
    let tables = index.pmf_tables(arch, alpha)?;
    let losses = evaluate_losses(&index.configs, loss_fn);
    Ok(index.expected(&tables, &losses))
}

/// Exact gradient of the expected loss with respect to every distribution
/// parameter: the probability-weighted sum of loss times score.
pub fn exact_grad<F>(
    arch: &ArchitectureSpec,
    alpha: &AlphaParams,
    loss_fn: F,
    limit: u128,
) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&NetworkConfig) -> f64 + Sync,
{
    alpha.validate(arch)?;
    let index = SpaceIndex::build(arch, limit)?;
    let tables = index.pmf_tables(arch, alpha)?;
    let losses = evaluate_losses(&index.configs, loss_fn);

    let mut sums: Vec<Vec<KahanSum>> = alpha
        .layers
        .iter()
        .map(|v| vec![KahanSum::new(); v.len()])
        .collect();
    for (cfg_idx, m) in index.memberships.iter().enumerate() {
        let p: f64 = m.iter().enumerate().map(|(l, &i)| tables[l][i]).product();
        let weighted = losses[cfg_idx] * p;
        for (l, layer) in arch.layers.iter().enumerate() {
            match (&index.configs[cfg_idx].per_layer[l], &alpha.layer_probs(l)) {
                (LayerConfig::Quant(counts), crate::dist::LayerProbs::Multinomial(ph)) => {
                    for (t, sum) in sums[l].iter_mut().enumerate() {
                        let s = counts[t] as f64 - layer.filters as f64 * ph[t];
                        sum.add(weighted * s);
                    }
                }
                (LayerConfig::Prune(a), crate::dist::LayerProbs::Binomial(ph)) => {
                    let s = *a as f64 - (layer.filters as f64 - 1.0) * ph;
                    sums[l][0].add(weighted * s);
                }
                _ => unreachable!("family checked by validate"),
            }
        }
    }
    Ok(sums
        .into_iter()
        .map(|v| v.into_iter().map(|k| k.value()).collect())
        .collect())
}

/// Central finite differences of the expected loss on each parameter.
///
/// Per-configuration losses are evaluated once and reused across the
/// perturbed evaluations, so `loss_fn` cost does not multiply with the
/// parameter count.
pub fn finite_diff_grad<F>(
    arch: &ArchitectureSpec,
    alpha: &AlphaParams,
    loss_fn: F,
    h: f64,
    limit: u128,
) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&NetworkConfig) -> f64 + Sync,
{
    alpha.validate(arch)?;
    let index = SpaceIndex::build(arch, limit)?;
    let losses = evaluate_losses(&index.configs, loss_fn);

    let mut grad: Vec<Vec<f64>> = alpha.layers.iter().map(|v| vec![0.0; v.len()]).collect();
    for (l, layer_grad) in grad.iter_mut().enumerate() {
        for (t, slot) in layer_grad.iter_mut().enumerate() {
            let mut plus = alpha.clone();
            plus.layers[l][t] += h;
            let mut minus = alpha.clone();
            minus.layers[l][t] -= h;
            let jp = index.expected(&index.pmf_tables(arch, &plus)?, &losses);
            let jm = index.expected(&index.pmf_tables(arch, &minus)?, &losses);
            *slot = (jp - jm) / (2.0 * h);
        }
    }
    Ok(grad)
}

/// Exhaustive argmin of `loss_fn` subject to a complexity cap.
///
/// Ties resolve to the earliest configuration in enumeration order.
pub fn grid_optimum<F>(
    arch: &ArchitectureSpec,
    loss_fn: F,
    cap: Option<f64>,
    opts: &ComplexityOptions,
    limit: u128,
) -> Result<NetworkConfig>
where
    F: Fn(&NetworkConfig) -> f64 + Sync,
{
    let configs = enumerate_configs(arch, limit)?;
    let mut best: Option<(f64, &NetworkConfig)> = None;
    let losses = evaluate_losses(&configs, loss_fn);
    for (cfg, &loss) in configs.iter().zip(&losses) {
        if let Some(cap) = cap {
            let (_, _, total) = network_total(arch, cfg, opts)?;
            if total > cap {
                continue;
            }
        }
        match best {
            Some((b, _)) if loss >= b => {}
            _ => best = Some((loss, cfg)),
        }
    }
    match best {
        Some((_, cfg)) => Ok(cfg.clone()),
        None => Err(Error::InfeasibleCap {
            cap: cap.unwrap_or(f64::INFINITY),
        }),
    }
}
