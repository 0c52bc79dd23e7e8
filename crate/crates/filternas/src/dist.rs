//! Configuration distributions over layers and networks.
//!
//! Quantization layers draw operation counts from a multinomial over the
//! layer's operation menu; pruning layers draw an active width from a
//! binomial over `filters - 1` trials. Distribution parameters are
//! normalized by softmax (multinomial) or sigmoid (binomial). Mass
//! functions are evaluated in log space; probabilities are clamped away
//! from {0, 1} by 1e-12 only inside log computations, never in returned
//! values.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::arch::{ArchitectureSpec, LayerConfig, LayerSpec, NetworkConfig, OperationSet};
use crate::error::{Error, Result};

/// Clamp applied to probabilities inside logarithms.
const LOG_CLAMP: f64 = 1e-12;

/// Distribution family over layer configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Multinomial,
    Binomial,
}

impl Family {
    /// The family induced by an architecture's compression mode.
    pub fn of(arch: &ArchitectureSpec) -> Family {
        if arch.is_quantization() {
            Family::Multinomial
        } else {
            Family::Binomial
        }
    }
}

/// Trainable distribution parameters, one vector per layer.
///
/// Multinomial layers hold one entry per operation; binomial layers hold a
/// single entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaParams {
    pub family: Family,
    pub layers: Vec<Vec<f64>>,
}

impl AlphaParams {
    /// Uniform initialization: all parameters zero, giving uniform softmax
    /// probabilities and sigmoid probability one half.
    pub fn uniform(arch: &ArchitectureSpec) -> Self {
        let family = Family::of(arch);
        let layers = arch
            .layers
            .iter()
            .map(|layer| match &layer.ops {
                OperationSet::Quantization(ops) => vec![0.0; ops.len()],
                OperationSet::Pruning => vec![0.0],
            })
            .collect();
        AlphaParams { family, layers }
    }

    /// Binomial initialization at a chosen success probability.
    pub fn from_prob(arch: &ArchitectureSpec, p: f64) -> Result<Self> {
        if Family::of(arch) != Family::Binomial {
            return Err(Error::InvalidInput(
                "probability initialization applies to the binomial family".into(),
            ));
        }
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidInput(format!(
                "initial probability {p} outside (0, 1)"
            )));
        }
        let alpha = (p / (1.0 - p)).ln();
        Ok(AlphaParams {
            family: Family::Binomial,
            layers: vec![vec![alpha]; arch.layers.len()],
        })
    }

    pub fn validate(&self, arch: &ArchitectureSpec) -> Result<()> {
        if self.family != Family::of(arch) {
            return Err(Error::ShapeMismatch(
                "parameter family does not match the architecture".into(),
            ));
        }
        if self.layers.len() != arch.layers.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} parameter vectors for {} layers",
                self.layers.len(),
                arch.layers.len()
            )));
        }
        for (i, (vec, layer)) in self.layers.iter().zip(&arch.layers).enumerate() {
            let expected = match &layer.ops {
                OperationSet::Quantization(ops) => ops.len(),
                OperationSet::Pruning => 1,
            };
            if vec.len() != expected {
                return Err(Error::ShapeMismatch(format!(
                    "layer {i}: {} parameters, expected {expected}",
                    vec.len()
                )));
            }
            if vec.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "layer {i}: non-finite distribution parameter"
                )));
            }
        }
        Ok(())
    }

    /// Normalized probabilities for one layer.
    pub fn layer_probs(&self, layer: usize) -> LayerProbs {
        match self.family {
            Family::Multinomial => LayerProbs::Multinomial(softmax_probs(&self.layers[layer])),
            Family::Binomial => LayerProbs::Binomial(sigmoid_prob(self.layers[layer][0])),
        }
    }

    /// Largest absolute parameter difference; used by convergence checks.
    pub fn max_abs_diff(&self, other: &AlphaParams) -> f64 {
        self.layers
            .iter()
            .flatten()
            .zip(other.layers.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Normalized probabilities of one layer's distribution.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerProbs {
    Multinomial(Vec<f64>),
    Binomial(f64),
}

impl LayerProbs {
    pub fn as_multinomial(&self) -> Option<&[f64]> {
        match self {
            LayerProbs::Multinomial(p) => Some(p),
            LayerProbs::Binomial(_) => None,
        }
    }

    pub fn as_binomial(&self) -> Option<f64> {
        match self {
            LayerProbs::Binomial(p) => Some(*p),
            LayerProbs::Multinomial(_) => None,
        }
    }
}

/// Max-shifted softmax; exact for finite inputs of any magnitude.
pub fn softmax_probs(alpha: &[f64]) -> Vec<f64> {
    let max = alpha.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = alpha.iter().map(|a| (a - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Logistic normalization of a scalar parameter.
pub fn sigmoid_prob(alpha: f64) -> f64 {
    if alpha >= 0.0 {
        1.0 / (1.0 + (-alpha).exp())
    } else {
        let e = alpha.exp();
        e / (1.0 + e)
    }
}

/// ln(n!) by direct summation; exact to rounding for the filter counts in
/// scope (well under 10^3).
fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

fn ln_clamped(p: f64) -> f64 {
    p.max(LOG_CLAMP).ln()
}

/// Probability of a quantization layer configuration: the multinomial mass
/// of its operation counts, computed via log factorials.
pub fn multinomial_pmf(layer: &LayerSpec, probs: &[f64], cfg: &LayerConfig) -> Result<f64> {
    cfg.validate(layer)?;
    let counts = cfg.counts().ok_or_else(|| {
        Error::InvalidConfig("multinomial mass requires per-operation counts".into())
    })?;
    if counts.len() != probs.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} probabilities for {} operations",
            probs.len(),
            counts.len()
        )));
    }
    let mut log_p = ln_factorial(layer.filters);
    for (&a, &p) in counts.iter().zip(probs) {
        log_p -= ln_factorial(a);
        log_p += a as f64 * ln_clamped(p);
    }
    Ok(log_p.exp())
}

/// Probability of a pruning layer configuration: binomial mass of the
/// sampled width over `filters - 1` trials.
pub fn binomial_pmf(layer: &LayerSpec, p: f64, cfg: &LayerConfig) -> Result<f64> {
    cfg.validate(layer)?;
    let a = match cfg {
        LayerConfig::Prune(a) => *a,
        LayerConfig::Quant(_) => {
            return Err(Error::InvalidConfig(
                "binomial mass requires a sampled width".into(),
            ))
        }
    };
    let trials = layer.filters - 1;
    let log_coeff = ln_factorial(trials) - ln_factorial(a) - ln_factorial(trials - a);
    let log_p = log_coeff + a as f64 * ln_clamped(p) + (trials - a) as f64 * ln_clamped(1.0 - p);
    Ok(log_p.exp())
}

/// Mass of a layer configuration under either family.
pub fn layer_pmf(layer: &LayerSpec, probs: &LayerProbs, cfg: &LayerConfig) -> Result<f64> {
    match probs {
        LayerProbs::Multinomial(p) => multinomial_pmf(layer, p, cfg),
        LayerProbs::Binomial(p) => binomial_pmf(layer, *p, cfg),
    }
}

/// Derivative of the multinomial layer mass with respect to the parameter
/// of operation `op`: `(a_op - filters * p_op) * Pr`.
pub fn multinomial_layer_pmf_grad(
    layer: &LayerSpec,
    probs: &[f64],
    cfg: &LayerConfig,
    op: usize,
) -> Result<f64> {
    let pr = multinomial_pmf(layer, probs, cfg)?;
    let counts = cfg.counts().expect("validated quantization config");
    if op >= probs.len() {
        return Err(Error::InvalidInput(format!(
            "operation index {op} outside 0..{}",
            probs.len()
        )));
    }
    Ok((counts[op] as f64 - layer.filters as f64 * probs[op]) * pr)
}

/// Derivative of the binomial layer mass with respect to the layer
/// parameter: `(a - (filters - 1) * p) * Pr`.
pub fn binomial_layer_pmf_grad(layer: &LayerSpec, p: f64, cfg: &LayerConfig) -> Result<f64> {
    let pr = binomial_pmf(layer, p, cfg)?;
    let a = match cfg {
        LayerConfig::Prune(a) => *a as f64,
        LayerConfig::Quant(_) => unreachable!("validated pruning config"),
    };
    Ok((a - (layer.filters as f64 - 1.0) * p) * pr)
}

/// Samples one layer configuration.
///
/// Multinomial layers aggregate `filters` independent categorical draws into
/// counts; binomial layers sum `filters - 1` Bernoulli draws. Deterministic
/// given the generator state.
pub fn sample_layer<R: Rng>(layer: &LayerSpec, probs: &LayerProbs, rng: &mut R) -> LayerConfig {
    match probs {
        LayerProbs::Multinomial(p) => {
            let mut counts = vec![0usize; p.len()];
            for _ in 0..layer.filters {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                let mut chosen = p.len() - 1;
                for (i, &pi) in p.iter().enumerate() {
                    acc += pi;
                    if u < acc {
                        chosen = i;
                        break;
                    }
                }
                counts[chosen] += 1;
            }
            LayerConfig::Quant(counts)
        }
        LayerProbs::Binomial(p) => {
            let mut successes = 0usize;
            for _ in 0..layer.filters.saturating_sub(1) {
                let u: f64 = rng.gen();
                if u < *p {
                    successes += 1;
                }
            }
            LayerConfig::Prune(successes)
        }
    }
}

/// Samples a full network configuration, layer by layer in order.
pub fn sample_network<R: Rng>(
    arch: &ArchitectureSpec,
    alpha: &AlphaParams,
    rng: &mut R,
) -> NetworkConfig {
    let per_layer = arch
        .layers
        .iter()
        .enumerate()
        .map(|(i, layer)| sample_layer(layer, &alpha.layer_probs(i), rng))
        .collect();
    NetworkConfig::new(per_layer)
}

/// Probability of a network configuration: the product of per-layer masses.
pub fn network_config_prob(
    arch: &ArchitectureSpec,
    alpha: &AlphaParams,
    cfg: &NetworkConfig,
) -> Result<f64> {
    Ok(network_config_log_prob(arch, alpha, cfg)?.exp())
}

/// Log probability of a network configuration.
pub fn network_config_log_prob(
    arch: &ArchitectureSpec,
    alpha: &AlphaParams,
    cfg: &NetworkConfig,
) -> Result<f64> {
    alpha.validate(arch)?;
    cfg.validate(arch)?;
    let mut log_p = 0.0;
    for (i, (layer, layer_cfg)) in arch.layers.iter().zip(&cfg.per_layer).enumerate() {
        let pr = layer_pmf(layer, &alpha.layer_probs(i), layer_cfg)?;
        log_p += ln_clamped(pr);
    }
    Ok(log_p)
}

/// Score of a configuration with respect to one parameter: the
/// per-layer factor `a - trials * p` of the log-probability gradient
/// (`trials` is the filter count for multinomial layers and the filter
/// count minus one for binomial layers).
pub fn score(
    arch: &ArchitectureSpec,
    alpha: &AlphaParams,
    cfg: &NetworkConfig,
    layer: usize,
    op: usize,
) -> Result<f64> {
    alpha.validate(arch)?;
    cfg.validate(arch)?;
    let spec = &arch.layers[layer];
    match (&cfg.per_layer[layer], alpha.layer_probs(layer)) {
        (LayerConfig::Quant(counts), LayerProbs::Multinomial(p)) => {
            if op >= p.len() {
                return Err(Error::InvalidInput(format!(
                    "operation index {op} outside 0..{}",
                    p.len()
                )));
            }
            Ok(counts[op] as f64 - spec.filters as f64 * p[op])
        }
        (LayerConfig::Prune(a), LayerProbs::Binomial(p)) => {
            if op != 0 {
                return Err(Error::InvalidInput(
                    "binomial layers have a single parameter".into(),
                ));
            }
            Ok(*a as f64 - (spec.filters as f64 - 1.0) * p)
        }
        _ => Err(Error::InvalidConfig(
            "configuration variant does not match the parameter family".into(),
        )),
    }
}

/// Derivative of the network configuration probability with respect to the
/// parameter `(layer, op)`: `score * p(cfg)`.
pub fn network_config_prob_grad(
    arch: &ArchitectureSpec,
    alpha: &AlphaParams,
    cfg: &NetworkConfig,
    layer: usize,
    op: usize,
) -> Result<f64> {
    let s = score(arch, alpha, cfg, layer, op)?;
    let p = network_config_prob(arch, alpha, cfg)?;
    Ok(s * p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::layer_configs;
    use crate::testutil::{assert_close, prune_arch, prune_layer, quant_arch, quant_layer};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn softmax_matches_hand_values() {
        let p = softmax_probs(&[0.0, 0.0]);
        assert_close(p[0], 0.5, 1e-15, 0.0);
        assert_close(p[1], 0.5, 1e-15, 0.0);

        let p = softmax_probs(&[3f64.ln(), 0.0]);
        assert_close(p[0], 0.75, 1e-14, 0.0);
        assert_close(p[1], 0.25, 1e-14, 0.0);
    }

    #[test]
    fn softmax_survives_extreme_parameters() {
        let p = softmax_probs(&[1000.0, 0.0]);
        assert!(p.iter().all(|v| v.is_finite()));
        assert_close(p[0], 1.0, 1e-12, 0.0);
        assert!(p[1] >= 0.0 && p[1] < 1e-300);
        // Shifting both entries by a constant leaves the result unchanged:
        // compare against the same distribution in a representable range.
        let q = softmax_probs(&[500.0, -500.0]);
        assert_close(p[0], q[0], 1e-12, 0.0);
    }

    #[test]
    fn sigmoid_reference_points_and_symmetry() {
        assert_close(sigmoid_prob(0.0), 0.5, 1e-15, 0.0);
        assert_close(sigmoid_prob(3f64.ln()), 0.75, 1e-15, 0.0);
        for a in [-7.5, -1.0, -0.3, 0.2, 2.0, 40.0] {
            assert_close(sigmoid_prob(-a), 1.0 - sigmoid_prob(a), 0.0, 1e-15);
        }
    }

    #[test]
    fn multinomial_pmf_hand_values() {
        let layer = quant_layer(2, 1, &[(2, 2), (3, 3)]);
        let p = [0.5, 0.5];
        let pr = multinomial_pmf(&layer, &p, &LayerConfig::Quant(vec![1, 1])).unwrap();
        assert_close(pr, 0.5, 1e-12, 0.0);
        let pr = multinomial_pmf(&layer, &p, &LayerConfig::Quant(vec![2, 0])).unwrap();
        assert_close(pr, 0.25, 1e-12, 0.0);
        assert!(multinomial_pmf(&layer, &p, &LayerConfig::Quant(vec![2, 1])).is_err());
    }

    #[test]
    fn multinomial_pmf_sums_to_one() {
        let layer = quant_layer(2, 1, &[(2, 2), (3, 3)]);
        let p = [0.5, 0.5];
        let total: f64 = layer_configs(&layer)
            .iter()
            .map(|cfg| multinomial_pmf(&layer, &p, cfg).unwrap())
            .sum();
        assert_close(total, 1.0, 1e-12, 0.0);
    }

    #[test]
    fn binomial_pmf_hand_values() {
        let layer = prune_layer(4, 1);
        let pr = binomial_pmf(&layer, 0.5, &LayerConfig::Prune(1)).unwrap();
        assert_close(pr, 0.375, 1e-12, 0.0);
        let pr = binomial_pmf(&layer, 0.5, &LayerConfig::Prune(0)).unwrap();
        assert_close(pr, 0.125, 1e-12, 0.0);
        assert!(binomial_pmf(&layer, 0.5, &LayerConfig::Prune(4)).is_err());

        let total: f64 = layer_configs(&layer)
            .iter()
            .map(|cfg| binomial_pmf(&layer, 0.5, cfg).unwrap())
            .sum();
        assert_close(total, 1.0, 1e-12, 0.0);
    }

    #[test]
    fn layer_pmf_grads_match_hand_values() {
        // Uniform two-operation layer with both filters on one operation.
        let layer = quant_layer(2, 1, &[(2, 2), (3, 3)]);
        let p = [0.5, 0.5];
        let g = multinomial_layer_pmf_grad(&layer, &p, &LayerConfig::Quant(vec![1, 1]), 0).unwrap();
        assert_close(g, 0.0, 0.0, 1e-15);
        let g = multinomial_layer_pmf_grad(&layer, &p, &LayerConfig::Quant(vec![2, 0]), 0).unwrap();
        assert_close(g, 0.25, 1e-12, 0.0);

        let prune = prune_layer(4, 1);
        let g = binomial_layer_pmf_grad(&prune, 0.5, &LayerConfig::Prune(1)).unwrap();
        assert_close(g, -0.1875, 1e-12, 0.0);
    }

    #[test]
    fn layer_pmf_grads_sum_to_zero() {
        let layer = quant_layer(3, 1, &[(2, 2), (3, 3), (8, 8)]);
        let p = softmax_probs(&[0.4, -0.2, 0.1]);
        for op in 0..3 {
            let total: f64 = layer_configs(&layer)
                .iter()
                .map(|cfg| multinomial_layer_pmf_grad(&layer, &p, cfg, op).unwrap())
                .sum();
            assert_close(total, 0.0, 0.0, 1e-10);
        }

        let prune = prune_layer(5, 1);
        let total: f64 = layer_configs(&prune)
            .iter()
            .map(|cfg| binomial_layer_pmf_grad(&prune, 0.37, cfg).unwrap())
            .sum();
        assert_close(total, 0.0, 0.0, 1e-10);
    }

    #[test]
    fn network_prob_multiplies_layers() {
        let arch = quant_arch(&[2, 2], &[(2, 2), (3, 3)]);
        let alpha = AlphaParams::uniform(&arch);
        let cfg = NetworkConfig::new(vec![
            LayerConfig::Quant(vec![1, 1]),
            LayerConfig::Quant(vec![1, 1]),
        ]);
        let p = network_config_prob(&arch, &alpha, &cfg).unwrap();
        assert_close(p, 0.25, 1e-12, 0.0);

        let one = quant_arch(&[2], &[(2, 2), (3, 3)]);
        let alpha1 = AlphaParams::uniform(&one);
        let cfg1 = NetworkConfig::new(vec![LayerConfig::Quant(vec![1, 1])]);
        let layer_mass = multinomial_pmf(&one.layers[0], &[0.5, 0.5], &cfg1.per_layer[0]).unwrap();
        let net_mass = network_config_prob(&one, &alpha1, &cfg1).unwrap();
        assert_close(net_mass, layer_mass, 1e-12, 0.0);
    }

    #[test]
    fn grad_over_prob_reduces_to_score() {
        let arch = quant_arch(&[3, 2], &[(2, 2), (8, 8)]);
        let alpha = AlphaParams {
            family: Family::Multinomial,
            layers: vec![vec![0.3, -0.4], vec![0.1, 0.9]],
        };
        let cfg = NetworkConfig::new(vec![
            LayerConfig::Quant(vec![2, 1]),
            LayerConfig::Quant(vec![0, 2]),
        ]);
        for layer in 0..2 {
            for op in 0..2 {
                let g = network_config_prob_grad(&arch, &alpha, &cfg, layer, op).unwrap();
                let p = network_config_prob(&arch, &alpha, &cfg).unwrap();
                let s = score(&arch, &alpha, &cfg, layer, op).unwrap();
                assert_close(g / p, s, 1e-10, 1e-12);
            }
        }
    }

    #[test]
    fn binomial_score_counts_trials_minus_one() {
        let arch = prune_arch(&[4]);
        let alpha = AlphaParams::uniform(&arch); // p = 0.5
        let cfg = NetworkConfig::new(vec![LayerConfig::Prune(3)]);
        let s = score(&arch, &alpha, &cfg, 0, 0).unwrap();
        assert_close(s, 1.5, 1e-15, 0.0);
    }

    #[test]
    fn sampling_is_deterministic_and_respects_degeneracy() {
        let arch = quant_arch(&[5], &[(2, 2), (8, 8)]);
        let layer = &arch.layers[0];
        let probs = LayerProbs::Multinomial(vec![1.0 - 1e-300, 1e-300]);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cfg = sample_layer(layer, &probs, &mut rng);
        assert_eq!(cfg, LayerConfig::Quant(vec![5, 0]));

        let alpha = AlphaParams::uniform(&arch);
        let a = sample_network(&arch, &alpha, &mut ChaCha8Rng::seed_from_u64(42));
        let b = sample_network(&arch, &alpha, &mut ChaCha8Rng::seed_from_u64(42));
        assert_eq!(a, b);
    }

    #[test]
    fn empirical_frequencies_match_mass() {
        // 10^5 draws; binomial proportion error is sqrt(p(1-p)/n) ~ 1.6e-3,
        // so a 4-sigma band is ~6.3e-3 per configuration.
        let layer = prune_layer(4, 1);
        let p = 0.6;
        let probs = LayerProbs::Binomial(p);
        let n = 100_000usize;
        let mut counts = [0usize; 4];
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..n {
            if let LayerConfig::Prune(a) = sample_layer(&layer, &probs, &mut rng) {
                counts[a] += 1;
            }
        }
        for (a, &c) in counts.iter().enumerate() {
            let expect = binomial_pmf(&layer, p, &LayerConfig::Prune(a)).unwrap();
            let se = (expect * (1.0 - expect) / n as f64).sqrt();
            let diff = (c as f64 / n as f64 - expect).abs();
            assert!(
                diff <= 4.0 * se,
                "config {a}: freq diff {diff} above 4 sigma ({})",
                4.0 * se
            );
        }
    }

    #[test]
    fn score_has_zero_mean_under_the_distribution() {
        let arch = quant_arch(&[4], &[(2, 2), (3, 3), (8, 8)]);
        let alpha = AlphaParams {
            family: Family::Multinomial,
            layers: vec![vec![0.2, -0.1, 0.4]],
        };
        let n = 100_000usize;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..n {
            let cfg = sample_network(&arch, &alpha, &mut rng);
            let s = score(&arch, &alpha, &cfg, 0, 0).unwrap();
            sum += s;
            sumsq += s * s;
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        let se = (var / n as f64).sqrt();
        assert!(
            mean.abs() <= 3.0 * se,
            "score mean {mean} above 3 standard errors ({})",
            3.0 * se
        );
    }

    #[test]
    fn chi_square_goodness_of_fit_not_rejected() {
        // Multinomial layer with 3 configurations (C=2, two ops): df = 2,
        // critical value at significance 0.001 is 13.8155.
        let layer = quant_layer(2, 1, &[(2, 2), (8, 8)]);
        let p = softmax_probs(&[0.3, -0.2]);
        let configs = layer_configs(&layer);
        let n = 100_000usize;
        let mut observed = vec![0usize; configs.len()];
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let probs = LayerProbs::Multinomial(p.clone());
        for _ in 0..n {
            let cfg = sample_layer(&layer, &probs, &mut rng);
            let idx = configs.iter().position(|c| *c == cfg).unwrap();
            observed[idx] += 1;
        }
        let mut stat = 0.0;
        for (cfg, &obs) in configs.iter().zip(&observed) {
            let expect = n as f64 * multinomial_pmf(&layer, &p, cfg).unwrap();
            stat += (obs as f64 - expect).powi(2) / expect;
        }
        assert!(stat < 13.8155, "chi-square statistic {stat} rejected");

        // Binomial layer with 4 configurations: df = 3, critical 16.266.
        let prune = prune_layer(4, 1);
        let bp = 0.45;
        let mut observed = [0usize; 4];
        for _ in 0..n {
            if let LayerConfig::Prune(a) = sample_layer(&prune, &LayerProbs::Binomial(bp), &mut rng)
            {
                observed[a] += 1;
            }
        }
        let mut stat = 0.0;
        for (a, &obs) in observed.iter().enumerate() {
            let expect = n as f64 * binomial_pmf(&prune, bp, &LayerConfig::Prune(a)).unwrap();
            stat += (obs as f64 - expect).powi(2) / expect;
        }
        assert!(stat < 16.266, "chi-square statistic {stat} rejected");
    }
}
