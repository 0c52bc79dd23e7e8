//! Verification suite behind the `oracle-check` subcommand: on randomized
//! enumerable instances, every analytic derivative is compared against
//! central finite differences, mass functions are checked for
//! normalization, and derivative sums over whole spaces are checked to
//! vanish.

use std::collections::HashMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::arch::{ArchitectureSpec, BitWidths, LayerSpec, NetworkConfig, OperationSet};
use crate::dist::{
    binomial_layer_pmf_grad, binomial_pmf, multinomial_layer_pmf_grad, multinomial_pmf,
    network_config_prob, network_config_prob_grad, sigmoid_prob, softmax_probs, AlphaParams,
    Family,
};
use crate::error::Result;
use crate::oracle::{enumerate_space, exact_grad, finite_diff_grad, layer_configs, space_size};

const REL_TOL: f64 = 1e-6;
const ABS_TOL: f64 = 1e-8;
const SUM_TOL: f64 = 1e-10;
const FD_STEP: f64 = 1e-5;
/// Instances whose full space exceeds this are resampled, keeping the
/// expected-loss checks fast while staying inside the size bounds.
const SPACE_CAP: u128 = 40_000;

/// One line of the verification table.
#[derive(Debug, Clone)]
pub struct CheckLine {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Outcome of the whole suite.
#[derive(Debug, Clone, Default)]
pub struct CheckReport {
    pub lines: Vec<CheckLine>,
}

impl CheckReport {
    pub fn all_passed(&self) -> bool {
        self.lines.iter().all(|l| l.passed)
    }

    fn push(&mut self, name: &str, passed: bool, detail: String) {
        self.lines.push(CheckLine {
            name: name.to_string(),
            passed,
            detail,
        });
    }
}

fn within(analytic: f64, reference: f64) -> f64 {
    // Relative error with an absolute floor; 0 means inside tolerance.
    let diff = (analytic - reference).abs();
    let tol = ABS_TOL.max(REL_TOL * analytic.abs().max(reference.abs()));
    if diff <= tol {
        0.0
    } else {
        diff / tol
    }
}

struct Instance {
    arch: ArchitectureSpec,
    alpha: AlphaParams,
}

fn random_instance(rng: &mut ChaCha8Rng, family: Family) -> Instance {
    loop {
        let num_layers = rng.gen_range(1..=3usize);
        let mut layers = Vec::with_capacity(num_layers);
        let mut in_c = 1usize;
        let mut alpha_layers = Vec::with_capacity(num_layers);
        for _ in 0..num_layers {
            let filters = rng.gen_range(2..=6usize);
            let ops = match family {
                Family::Multinomial => {
                    let count = rng.gen_range(2..=4usize);
                    let mut menu = Vec::new();
                    while menu.len() < count {
                        let op = BitWidths::new(rng.gen_range(1..=8), rng.gen_range(1..=8));
                        if !menu.contains(&op) {
                            menu.push(op);
                        }
                    }
                    alpha_layers.push(
                        (0..count).map(|_| rng.gen_range(-1.5..1.5)).collect::<Vec<f64>>(),
                    );
                    OperationSet::Quantization(menu)
                }
                Family::Binomial => {
                    alpha_layers.push(vec![rng.gen_range(-1.5..1.5)]);
                    OperationSet::Pruning
                }
            };
            layers.push(LayerSpec {
                filters,
                in_channels: in_c,
                kernel: 3,
                out_height: 4,
                out_width: 4,
                ops,
            });
            in_c = filters;
        }
        let arch = ArchitectureSpec {
            layers,
            num_classes: 2,
            input_shape: (1, 4, 4),
        };
        if space_size(&arch).map(|n| n <= SPACE_CAP).unwrap_or(false) {
            return Instance {
                arch,
                alpha: AlphaParams {
                    family,
                    layers: alpha_layers,
                },
            };
        }
    }
}

/// Deterministic pseudo-random loss table over the enumerated space.
fn loss_table(arch: &ArchitectureSpec, rng: &mut ChaCha8Rng) -> Result<HashMap<String, f64>> {
    let alpha = AlphaParams::uniform(arch);
    let space = enumerate_space(arch, &alpha, SPACE_CAP)?;
    Ok(space
        .configs
        .iter()
        .map(|cfg| (cfg.id(), rng.gen_range(0.5..3.5)))
        .collect())
}

fn layer_grad_check(
    instance: &Instance,
    rng: &mut ChaCha8Rng,
    worst: &mut f64,
) -> Result<()> {
    for (l, layer) in instance.arch.layers.iter().enumerate() {
        let configs = layer_configs(layer);
        let cfg = &configs[rng.gen_range(0..configs.len())];
        let alpha = &instance.alpha.layers[l];
        match instance.alpha.family {
            Family::Multinomial => {
                for t in 0..alpha.len() {
                    let analytic =
                        multinomial_layer_pmf_grad(layer, &softmax_probs(alpha), cfg, t)?;
                    let mut plus = alpha.clone();
                    plus[t] += FD_STEP;
                    let mut minus = alpha.clone();
                    minus[t] -= FD_STEP;
                    let fp = multinomial_pmf(layer, &softmax_probs(&plus), cfg)?;
                    let fm = multinomial_pmf(layer, &softmax_probs(&minus), cfg)?;
                    let fd = (fp - fm) / (2.0 * FD_STEP);
                    *worst = worst.max(within(analytic, fd));
                }
            }
            Family::Binomial => {
                let analytic = binomial_layer_pmf_grad(layer, sigmoid_prob(alpha[0]), cfg)?;
                let fp = binomial_pmf(layer, sigmoid_prob(alpha[0] + FD_STEP), cfg)?;
                let fm = binomial_pmf(layer, sigmoid_prob(alpha[0] - FD_STEP), cfg)?;
                let fd = (fp - fm) / (2.0 * FD_STEP);
                *worst = worst.max(within(analytic, fd));
            }
        }
    }
    Ok(())
}

fn network_grad_check(
    instance: &Instance,
    rng: &mut ChaCha8Rng,
    worst: &mut f64,
) -> Result<()> {
    let arch = &instance.arch;
    let alpha = &instance.alpha;
    let space = enumerate_space(arch, alpha, SPACE_CAP)?;
    let cfg = &space.configs[rng.gen_range(0..space.configs.len())];
    for l in 0..arch.layers.len() {
        for t in 0..alpha.layers[l].len() {
            let analytic = network_config_prob_grad(arch, alpha, cfg, l, t)?;
            let mut plus = alpha.clone();
            plus.layers[l][t] += FD_STEP;
            let mut minus = alpha.clone();
            minus.layers[l][t] -= FD_STEP;
            let fp = network_config_prob(arch, &plus, cfg)?;
            let fm = network_config_prob(arch, &minus, cfg)?;
            let fd = (fp - fm) / (2.0 * FD_STEP);
            *worst = worst.max(within(analytic, fd));
        }
    }
    Ok(())
}

fn expected_grad_check(
    instance: &Instance,
    rng: &mut ChaCha8Rng,
    worst: &mut f64,
) -> Result<()> {
    let table = loss_table(&instance.arch, rng)?;
    let loss = |cfg: &NetworkConfig| table[&cfg.id()];
    let exact = exact_grad(&instance.arch, &instance.alpha, loss, SPACE_CAP)?;
    let fd = finite_diff_grad(&instance.arch, &instance.alpha, loss, FD_STEP, SPACE_CAP)?;
    for (le, lf) in exact.iter().zip(&fd) {
        for (&e, &f) in le.iter().zip(lf) {
            *worst = worst.max(within(e, f));
        }
    }
    Ok(())
}

fn mass_checks(instance: &Instance, worst_sum: &mut f64, worst_grad_sum: &mut f64) -> Result<()> {
    let space = enumerate_space(&instance.arch, &instance.alpha, SPACE_CAP)?;
    let total: f64 = space.probs.iter().sum();
    *worst_sum = worst_sum.max((total - 1.0).abs());
    for l in 0..instance.arch.layers.len() {
        for t in 0..instance.alpha.layers[l].len() {
            let mut sum = 0.0;
            for cfg in &space.configs {
                sum += network_config_prob_grad(&instance.arch, &instance.alpha, cfg, l, t)?;
            }
            *worst_grad_sum = worst_grad_sum.max(sum.abs());
        }
    }
    Ok(())
}

/// Runs the suite over `instances` randomized instances per family.
pub fn run_oracle_check(seed: u64, instances: usize) -> Result<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = CheckReport::default();

    let mut layer_worst = 0.0f64;
    let mut network_worst = 0.0f64;
    let mut expected_worst = 0.0f64;
    let mut sum_worst = 0.0f64;
    let mut grad_sum_worst = 0.0f64;

    for i in 0..instances {
        let family = if i % 2 == 0 {
            Family::Multinomial
        } else {
            Family::Binomial
        };
        let instance = random_instance(&mut rng, family);
        layer_grad_check(&instance, &mut rng, &mut layer_worst)?;
        network_grad_check(&instance, &mut rng, &mut network_worst)?;
        expected_grad_check(&instance, &mut rng, &mut expected_worst)?;
        mass_checks(&instance, &mut sum_worst, &mut grad_sum_worst)?;
    }

    report.push(
        "layer mass derivatives vs finite differences",
        layer_worst == 0.0,
        format!("{instances} instances, worst excess {layer_worst:.3}"),
    );
    report.push(
        "network probability derivatives vs finite differences",
        network_worst == 0.0,
        format!("{instances} instances, worst excess {network_worst:.3}"),
    );
    report.push(
        "expected-loss gradients vs finite differences",
        expected_worst == 0.0,
        format!("{instances} instances, worst excess {expected_worst:.3}"),
    );
    report.push(
        "mass normalization over enumerated spaces",
        sum_worst <= SUM_TOL,
        format!("worst |sum - 1| = {sum_worst:.3e}"),
    );
    report.push(
        "probability-derivative sums vanish",
        grad_sum_worst <= SUM_TOL,
        format!("worst |sum| = {grad_sum_worst:.3e}"),
    );
    Ok(report)
}
