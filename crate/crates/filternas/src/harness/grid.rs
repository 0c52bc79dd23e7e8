//! Grid variance study: repeated training of listed configurations with
//! early stopping, plus the normal-approximation confidence intervals used
//! to report them.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arch::{make_homogeneous, ArchitectureSpec, HomogeneousTarget, LayerConfig, NetworkConfig};
use crate::complexity::{network_total, ComplexityOptions};
use crate::error::{Error, Result};
use crate::harness::files::GridSettings;
use crate::net::{evaluate, init_weights, train_epochs, Dataset, Selection, SgdMomentum, TrainSettings};
use crate::util::derive_seed;

/// Result of training one configuration `repeats` times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub config_id: String,
    pub config: NetworkConfig,
    /// Total arithmetic complexity.
    pub z: f64,
    /// Best validation accuracy of each successful repeat.
    pub samples: Vec<f64>,
    pub mean: f64,
    pub ci_half: f64,
    pub homogeneous: bool,
    /// Diagnostics of failed repeats; successes plus failures equal the
    /// requested repeat count.
    pub failures: Vec<String>,
}

/// Inverse standard normal CDF (Acklam's rational approximation, absolute
/// error below 1.2e-9 on (0, 1)).
pub fn normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile needs p in (0, 1), got {p}");
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.38357751867269e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -((((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0))
    }
}

/// Mean and half-width `z * s / sqrt(n)` of a normal-approximation
/// confidence interval at the given two-sided coverage level. One sample
/// yields half-width zero by convention.
pub fn confidence_interval(samples: &[f64], level: f64) -> (f64, f64) {
    assert!(!samples.is_empty(), "confidence interval needs samples");
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() == 1 || level <= 0.0 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    let z = normal_quantile((1.0 + level) / 2.0);
    (mean, z * var.sqrt() / n.sqrt())
}

/// Trains one configuration once with early stopping: epochs run until
/// `patience` consecutive epochs bring no new best validation accuracy, or
/// `max_epochs` is reached. Returns the best validation accuracy.
fn train_one(
    arch: &ArchitectureSpec,
    data: &Dataset,
    cfg: &NetworkConfig,
    train: &TrainSettings,
    patience: usize,
    max_epochs: usize,
    seed: u64,
) -> Result<f64> {
    let mut weights = init_weights(arch, seed)?;
    let mut opt = SgdMomentum::new(&weights);
    let mut best = f64::NEG_INFINITY;
    let mut stale = 0usize;
    for _ in 0..max_epochs {
        train_epochs(arch, &mut weights, &mut opt, Some(cfg), data, Selection::Train, 1, train)?;
        let (_, acc) = evaluate(arch, &weights, Some(cfg), data, Selection::Validation)?;
        if acc > best {
            best = acc;
            stale = 0;
        } else {
            stale += 1;
            if stale >= patience {
                break;
            }
        }
    }
    Ok(best)
}

/// Builds the configuration list for a grid study: homogeneous
/// configurations (when enabled) followed by the explicitly listed extras.
pub fn grid_configs(arch: &ArchitectureSpec, grid: &GridSettings) -> Result<Vec<NetworkConfig>> {
    let mut configs = Vec::new();
    if grid.include_homogeneous {
        if arch.is_quantization() {
            let ops = arch.layers[0].ops.num_ops().unwrap_or(0);
            for idx in 0..ops {
                configs.push(make_homogeneous(arch, HomogeneousTarget::OpIndex(idx))?);
            }
        } else {
            for ratio in [0.25, 0.5, 0.75, 1.0] {
                let cfg = make_homogeneous(arch, HomogeneousTarget::WidthRatio(ratio))?;
                if !configs.contains(&cfg) {
                    configs.push(cfg);
                }
            }
        }
    }
    for counts in &grid.extra_quant {
        let cfg = NetworkConfig::new(counts.iter().cloned().map(LayerConfig::Quant).collect());
        cfg.validate(arch)?;
        configs.push(cfg);
    }
    for widths in &grid.extra_widths {
        let per_layer = widths
            .iter()
            .map(|&n| {
                if n == 0 {
                    Err(Error::InvalidConfig("filter counts start at 1".into()))
                } else {
                    Ok(LayerConfig::Prune(n - 1))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let cfg = NetworkConfig::new(per_layer);
        cfg.validate(arch)?;
        configs.push(cfg);
    }
    if configs.is_empty() {
        return Err(Error::InvalidInput("grid study has no configurations".into()));
    }
    Ok(configs)
}

/// Runs the study: each configuration trains `repeats` times from derived
/// seeds; failed repeats are recorded and the study continues.
pub fn run_grid_study(
    arch: &ArchitectureSpec,
    data: &Dataset,
    configs: &[NetworkConfig],
    grid: &GridSettings,
    train: &TrainSettings,
    opts: &ComplexityOptions,
    seed: u64,
) -> Result<Vec<GridResult>> {
    if grid.repeats == 0 {
        return Err(Error::InvalidInput("grid study needs repeats >= 1".into()));
    }
    let level = 0.6827;
    configs
        .par_iter()
        .enumerate()
        .map(|(ci, cfg)| -> Result<GridResult> {
            cfg.validate(arch)?;
            let (_, _, z) = network_total(arch, cfg, opts)?;
            let mut samples = Vec::with_capacity(grid.repeats);
            let mut failures = Vec::new();
            for r in 0..grid.repeats {
                let run_seed = derive_seed(seed, "grid", ci as u64, r as u64);
                match train_one(arch, data, cfg, train, grid.patience, grid.max_epochs, run_seed) {
                    Ok(acc) => samples.push(acc),
                    Err(e) => failures.push(format!("repeat {r}: {e}")),
                }
            }
            let (mean, ci_half) = if samples.is_empty() {
                (0.0, 0.0)
            } else {
                confidence_interval(&samples, level)
            };
            Ok(GridResult {
                config_id: cfg.id(),
                config: cfg.clone(),
                z,
                samples,
                mean,
                ci_half,
                homogeneous: cfg.is_homogeneous(arch),
                failures,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::SyntheticSpec;
    use crate::testutil::{assert_close, prune_arch};

    #[test]
    fn quantile_reference_values() {
        assert_close(normal_quantile(0.5), 0.0, 0.0, 1e-9);
        assert_close(normal_quantile(0.8413447460685429), 1.0, 1e-6, 1e-7);
        assert_close(normal_quantile(0.975), 1.959964, 1e-5, 0.0);
        assert_close(normal_quantile(0.025), -1.959964, 1e-5, 0.0);
        assert_close(normal_quantile(0.999), 3.090232, 1e-5, 0.0);
    }

    #[test]
    fn confidence_interval_reference_values() {
        let (mean, half) = confidence_interval(&[1.0, 1.0, 1.0], 0.6827);
        assert_eq!((mean, half), (1.0, 0.0));

        // Two samples (0, 2): s = sqrt(2), half-width = z * 1 with z very
        // close to 1 at the one-sigma coverage level.
        let (mean, half) = confidence_interval(&[0.0, 2.0], 0.6827);
        assert_eq!(mean, 1.0);
        assert_close(half, 1.0, 0.0, 1e-3);

        let (_, half) = confidence_interval(&[0.0, 2.0], 1e-9);
        assert!(half < 1e-6);

        let (mean, half) = confidence_interval(&[0.7], 0.6827);
        assert_eq!((mean, half), (0.7, 0.0));
    }

    fn tiny_prune_arch() -> ArchitectureSpec {
        let mut arch = prune_arch(&[4]);
        arch.num_classes = 2;
        arch.input_shape = (1, 4, 4);
        arch.layers[0].out_height = 4;
        arch.layers[0].out_width = 4;
        arch
    }

    fn tiny_data() -> Dataset {
        Dataset::synthetic(
            &SyntheticSpec {
                classes: 2,
                per_class: 10,
                height: 4,
                width: 4,
                noise: 0.05,
                alpha_frac: 0.4,
                omega_frac: 0.4,
                ..SyntheticSpec::default()
            },
            5,
        )
        .unwrap()
    }

    #[test]
    fn grid_config_list_covers_homogeneous_and_extras() {
        let arch = tiny_prune_arch();
        let grid = GridSettings {
            extra_widths: vec![vec![2]],
            ..GridSettings::default()
        };
        let configs = grid_configs(&arch, &grid).unwrap();
        // Widths 1, 2, 3, 4 homogeneous plus the extra (2) which duplicates
        // an existing one in content but is listed separately.
        assert_eq!(configs.len(), 5);
        assert!(configs.iter().all(|c| c.validate(&arch).is_ok()));

        let bad = GridSettings {
            extra_widths: vec![vec![9]],
            ..GridSettings::default()
        };
        assert!(grid_configs(&arch, &bad).is_err());
    }

    #[test]
    fn identical_seeds_give_zero_width_intervals() {
        let arch = tiny_prune_arch();
        let data = tiny_data();
        let grid = GridSettings {
            repeats: 2,
            patience: 2,
            max_epochs: 2,
            include_homogeneous: false,
            extra_widths: vec![vec![4]],
            ..GridSettings::default()
        };
        let train = TrainSettings {
            batch_size: 8,
            ..TrainSettings::default()
        };
        let opts = ComplexityOptions::default();
        // Derived seeds differ per repeat; force identical samples by
        // repeating the deterministic single-repeat run instead.
        let single = GridSettings { repeats: 1, ..grid.clone() };
        let a = run_grid_study(&arch, &data, &grid_configs(&arch, &single).unwrap(), &single, &train, &opts, 3).unwrap();
        let b = run_grid_study(&arch, &data, &grid_configs(&arch, &single).unwrap(), &single, &train, &opts, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[0].ci_half, 0.0);
        assert_eq!(a[0].samples.len(), 1);

        let multi = run_grid_study(&arch, &data, &grid_configs(&arch, &grid).unwrap(), &grid, &train, &opts, 3).unwrap();
        assert_eq!(multi[0].samples.len(), 2);
        assert!(multi[0].failures.is_empty());
        assert!(multi[0].ci_half >= 0.0);

        let none = GridSettings { repeats: 0, ..grid };
        let err = run_grid_study(&arch, &data, &[], &none, &train, &opts, 3);
        assert!(err.is_err());
    }

    #[test]
    fn diverging_repeats_are_recorded_and_the_study_continues() {
        let arch = tiny_prune_arch();
        let data = tiny_data();
        let grid = GridSettings {
            repeats: 2,
            patience: 2,
            max_epochs: 3,
            include_homogeneous: false,
            extra_widths: vec![vec![4]],
            ..GridSettings::default()
        };
        // A non-finite learning rate fails every repeat at its first
        // training step; failures are recorded and the study completes.
        let train = TrainSettings {
            batch_size: 8,
            learning_rate: f64::INFINITY,
            ..TrainSettings::default()
        };
        let opts = ComplexityOptions::default();
        let configs = grid_configs(&arch, &grid).unwrap();
        let results = run_grid_study(&arch, &data, &configs, &grid, &train, &opts, 3).unwrap();
        assert_eq!(results.len(), 1);
        assert_eq!(results[0].failures.len(), 2);
        assert!(results[0].samples.is_empty());
        assert_eq!((results[0].mean, results[0].ci_half), (0.0, 0.0));
    }
}
