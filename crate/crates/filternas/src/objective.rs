//! Loss functions: cross-entropy, the combined accuracy/complexity loss,
//! the interpolation loss against homogeneous anchors, and the exact
//! expected loss over enumerable spaces.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arch::{make_homogeneous, ArchitectureSpec, HomogeneousTarget, NetworkConfig};
use crate::complexity::{complexity_loss, network_total, ComplexityOptions};
use crate::dist::AlphaParams;
use crate::error::{Error, Result};
use crate::net::{
    evaluate, init_weights, train_epochs, Dataset, Selection, SgdMomentum, TrainSettings,
};
use crate::oracle;
use crate::sigma::Sigma;
use crate::util::derive_seed;

/// Cross-entropy, complexity, and combined loss of one evaluated
/// configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub ce: f64,
    /// Complexity loss term (zero in interpolation mode).
    pub complexity: f64,
    pub combined: f64,
    pub lambda: f64,
}

/// Mean negative log-likelihood of the labels under softmax logits,
/// log-sum-exp stabilized. The batch must be non-empty.
pub fn cross_entropy(logits: &[Vec<f64>], labels: &[usize]) -> f64 {
    assert!(!logits.is_empty(), "cross-entropy over an empty batch");
    assert_eq!(logits.len(), labels.len());
    let total: f64 = logits
        .iter()
        .zip(labels)
        .map(|(row, &label)| cross_entropy_single(row, label))
        .sum();
    total / logits.len() as f64
}

/// Negative log-likelihood of one sample.
pub fn cross_entropy_single(logits: &[f64], label: usize) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let log_sum: f64 = logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln() + max;
    log_sum - logits[label]
}

/// Combined loss: `ce + lambda * sigma(complexity ratio)`.
pub fn combined_loss(
    ce: f64,
    arch: &ArchitectureSpec,
    cfg: &NetworkConfig,
    target: &NetworkConfig,
    lambda: f64,
    sigma: Sigma,
    opts: &ComplexityOptions,
) -> Result<LossBreakdown> {
    if lambda < 0.0 {
        return Err(Error::InvalidInput(format!("lambda {lambda} is negative")));
    }
    let complexity = complexity_loss(arch, cfg, target, sigma, opts)?;
    Ok(LossBreakdown {
        ce,
        complexity,
        combined: ce + lambda * complexity,
        lambda,
    })
}

/// One homogeneous anchor: configuration id, its complexity, and its
/// cross-entropy averaged over independent training sessions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpAnchor {
    pub id: String,
    pub z: f64,
    pub ce_mean: f64,
}

/// Ordered homogeneous anchors supporting the interpolation loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpTable {
    anchors: Vec<InterpAnchor>,
}

impl InterpTable {
    /// Validates ordering: at least two anchors, strictly increasing z.
    pub fn new(anchors: Vec<InterpAnchor>) -> Result<Self> {
        if anchors.len() < 2 {
            return Err(Error::InvalidInput(
                "interpolation table needs at least two anchors".into(),
            ));
        }
        for pair in anchors.windows(2) {
            if pair[1].z <= pair[0].z {
                return Err(Error::InvalidInput(format!(
                    "anchor complexities must strictly increase: {} then {}",
                    pair[0].z, pair[1].z
                )));
            }
        }
        for a in &anchors {
            if !a.z.is_finite() || !a.ce_mean.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "anchor {} carries a non-finite value",
                    a.id
                )));
            }
        }
        Ok(InterpTable { anchors })
    }

    pub fn anchors(&self) -> &[InterpAnchor] {
        &self.anchors
    }

    pub fn z_range(&self) -> (f64, f64) {
        (
            self.anchors.first().unwrap().z,
            self.anchors.last().unwrap().z,
        )
    }

    /// Linear interpolation of the anchor cross-entropies at complexity
    /// `z`. Exact at anchors; out-of-range values are rejected rather than
    /// extrapolated.
    pub fn interp_ce(&self, z: f64) -> Result<f64> {
        let (min, max) = self.z_range();
        if z < min || z > max {
            return Err(Error::InterpOutOfRange {
                z,
                min,
                max,
                context: String::new(),
            });
        }
        if let Some(anchor) = self.anchors.iter().find(|a| a.z == z) {
            return Ok(anchor.ce_mean);
        }
        let upper = self
            .anchors
            .iter()
            .position(|a| a.z > z)
            .expect("z below max and not at an anchor");
        let lo = &self.anchors[upper - 1];
        let hi = &self.anchors[upper];
        let t = (z - lo.z) / (hi.z - lo.z);
        Ok(lo.ce_mean + t * (hi.ce_mean - lo.ce_mean))
    }

    /// Writes `config_id,z,ce_mean` rows. Values print in shortest
    /// round-trip form, so reading back is lossless.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut writer = csv::Writer::from_path(path)?;
        writer.write_record(["config_id", "z", "ce_mean"])?;
        for a in &self.anchors {
            writer.write_record([a.id.as_str(), &a.z.to_string(), &a.ce_mean.to_string()])?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::FileNotFound(path.to_path_buf()));
        }
        let mut reader = csv::Reader::from_path(path)?;
        let mut anchors = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| Error::Parse {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
            if record.len() != 3 {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    message: format!("expected 3 fields, found {}", record.len()),
                });
            }
            let parse = |s: &str| -> Result<f64> {
                s.trim().parse().map_err(|_| Error::Parse {
                    path: path.display().to_string(),
                    message: format!("bad number `{s}`"),
                })
            };
            anchors.push(InterpAnchor {
                id: record[0].to_string(),
                z: parse(&record[1])?,
                ce_mean: parse(&record[2])?,
            });
        }
        InterpTable::new(anchors)
    }

    /// Builds the anchor table by training each homogeneous width `sessions`
    /// times from independent derived seeds and averaging the resulting
    /// cross-entropies on the training selection.
    pub fn build(
        arch: &ArchitectureSpec,
        data: &Dataset,
        ratios: &[f64],
        sessions: usize,
        epochs: usize,
        train: &TrainSettings,
        seed: u64,
    ) -> Result<Self> {
        if sessions == 0 {
            return Err(Error::InvalidInput("anchor table needs sessions >= 1".into()));
        }
        let mut anchors = Vec::with_capacity(ratios.len());
        for (ri, &ratio) in ratios.iter().enumerate() {
            let cfg = make_homogeneous(arch, HomogeneousTarget::WidthRatio(ratio))?;
            let (_, _, z) = network_total(arch, &cfg, &ComplexityOptions::default())?;
            let ces = (0..sessions)
                .into_par_iter()
                .map(|s| -> Result<f64> {
                    let ws = derive_seed(seed, "anchor", ri as u64, s as u64);
                    let mut weights = init_weights(arch, ws)?;
                    let mut opt = SgdMomentum::new(&weights);
                    train_epochs(
                        arch,
                        &mut weights,
                        &mut opt,
                        Some(&cfg),
                        data,
                        Selection::Train,
                        epochs,
                        train,
                    )?;
                    Ok(evaluate(arch, &weights, Some(&cfg), data, Selection::Train)?.0)
                })
                .collect::<Result<Vec<f64>>>()?;
            anchors.push(InterpAnchor {
                id: format!("h{ratio}"),
                z,
                ce_mean: ces.iter().sum::<f64>() / sessions as f64,
            });
        }
        anchors.sort_by(|a, b| a.z.partial_cmp(&b.z).expect("finite complexities"));
        InterpTable::new(anchors)
    }
}

/// Interpolation loss: `sigma(ce - interp_ce(z))`. Negative inputs are
/// legitimate (the configuration beats the homogeneous interpolation);
/// there is no explicit complexity term.
pub fn interpolation_loss(ce: f64, z: f64, table: &InterpTable, sigma: Sigma) -> Result<f64> {
    Ok(sigma.apply(ce - table.interp_ce(z)?))
}

/// Interpolation loss of a configuration, with its complexity computed from
/// the architecture.
pub fn config_interpolation_loss(
    ce: f64,
    arch: &ArchitectureSpec,
    cfg: &NetworkConfig,
    table: &InterpTable,
    sigma: Sigma,
    opts: &ComplexityOptions,
) -> Result<f64> {
    let (_, _, z) = network_total(arch, cfg, opts)?;
    interpolation_loss(ce, z, table, sigma).map_err(|e| match e {
        Error::InterpOutOfRange { z, min, max, .. } => Error::InterpOutOfRange {
            z,
            min,
            max,
            context: format!(" (configuration {})", cfg.id()),
        },
        other => other,
    })
}

/// Exact expected loss over the enumerated configuration space. Errors when
/// the space exceeds `limit`, pointing the caller at the sampled estimator.
pub fn expected_loss<F>(
    arch: &ArchitectureSpec,
    alpha: &AlphaParams,
    loss_fn: F,
    limit: u128,
) -> Result<f64>
where
    F: Fn(&NetworkConfig) -> f64 + Sync,
{
    oracle::expected_loss_exhaustive(arch, alpha, loss_fn, limit)
}
