//! On-disk formats: architecture files, experiment specs, parameter files,
//! and configuration files. All structured text is TOML or JSON with
//! unknown keys rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::arch::{ArchitectureSpec, BitWidths, LayerSpec, NetworkConfig, OperationSet};
use crate::dist::AlphaParams;
use crate::error::{Error, Result};
use crate::net::{Dataset, SyntheticSpec};
use crate::search::SearchSettings;

fn read_file(path: &Path) -> Result<String> {
    if !path.exists() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    Ok(std::fs::read_to_string(path)?)
}

fn parse_err(path: &Path, message: impl ToString) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        message: message.to_string(),
    }
}

// ---------------------------------------------------------------------------
// Architecture files.

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArchFile {
    num_classes: usize,
    /// (channels, height, width).
    input: [usize; 3],
    /// "quantization" or "pruning".
    mode: String,
    /// Default operation menu for quantization layers.
    quant_ops: Option<Vec<[u32; 2]>>,
    layer: Vec<LayerFile>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerFile {
    filters: usize,
    kernel: usize,
    /// Output dims; default to the input dims.
    height: Option<usize>,
    width: Option<usize>,
    /// Per-layer override of the operation menu.
    quant_ops: Option<Vec<[u32; 2]>>,
}

/// Loads and validates an architecture description. Input channels chain
/// automatically from layer to layer.
pub fn load_arch(path: &Path) -> Result<ArchitectureSpec> {
    let text = read_file(path)?;
    let file: ArchFile = toml::from_str(&text).map_err(|e| parse_err(path, e))?;
    let quantization = match file.mode.as_str() {
        "quantization" => true,
        "pruning" => false,
        other => {
            return Err(parse_err(
                path,
                format!("mode `{other}` is neither `quantization` nor `pruning`"),
            ))
        }
    };
    let [in_c, in_h, in_w] = file.input;
    let mut layers = Vec::with_capacity(file.layer.len());
    let mut chain = in_c;
    for (i, layer) in file.layer.iter().enumerate() {
        let ops = if quantization {
            let menu = layer
                .quant_ops
                .as_ref()
                .or(file.quant_ops.as_ref())
                .ok_or_else(|| {
                    parse_err(path, format!("layer {i}: quantization mode needs quant_ops"))
                })?;
            OperationSet::Quantization(
                menu.iter().map(|&[w, a]| BitWidths::new(w, a)).collect(),
            )
        } else {
            if layer.quant_ops.is_some() || file.quant_ops.is_some() {
                return Err(parse_err(path, "pruning mode does not take quant_ops"));
            }
            OperationSet::Pruning
        };
        layers.push(LayerSpec {
            filters: layer.filters,
            in_channels: chain,
            kernel: layer.kernel,
            out_height: layer.height.unwrap_or(in_h),
            out_width: layer.width.unwrap_or(in_w),
            ops,
        });
        chain = layer.filters;
    }
    let arch = ArchitectureSpec {
        layers,
        num_classes: file.num_classes,
        input_shape: (in_c, in_h, in_w),
    };
    arch.validate()?;
    Ok(arch)
}

// ---------------------------------------------------------------------------
// Experiment specs.

/// Search procedure selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Quant,
    PruneBasic,
    PruneReset,
    PruneNoshare,
    PruneInterp,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Quant => "quant",
            Algorithm::PruneBasic => "prune-basic",
            Algorithm::PruneReset => "prune-reset",
            Algorithm::PruneNoshare => "prune-noshare",
            Algorithm::PruneInterp => "prune-interp",
        }
    }
}

/// Dataset source declared in an experiment spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSpec {
    /// "synthetic" or "csv".
    pub kind: String,
    /// CSV path, relative to the spec file.
    pub path: Option<PathBuf>,
    pub classes: usize,
    pub per_class: usize,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub noise: f64,
    pub alpha_frac: f64,
    pub omega_frac: f64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        let s = SyntheticSpec::default();
        Self {
            kind: "synthetic".into(),
            path: None,
            classes: s.classes,
            per_class: s.per_class,
            channels: s.channels,
            height: s.height,
            width: s.width,
            noise: s.noise,
            alpha_frac: s.alpha_frac,
            omega_frac: s.omega_frac,
        }
    }
}

impl DatasetSpec {
    pub fn build(&self, base: &Path, seed: u64) -> Result<Dataset> {
        match self.kind.as_str() {
            "synthetic" => Dataset::synthetic(
                &SyntheticSpec {
                    classes: self.classes,
                    per_class: self.per_class,
                    channels: self.channels,
                    height: self.height,
                    width: self.width,
                    noise: self.noise,
                    alpha_frac: self.alpha_frac,
                    omega_frac: self.omega_frac,
                },
                seed,
            ),
            "csv" => {
                let path = self.path.as_ref().ok_or_else(|| {
                    Error::InvalidInput("csv dataset needs a `path`".into())
                })?;
                Dataset::from_csv(
                    &base.join(path),
                    (self.channels, self.height, self.width),
                    self.alpha_frac,
                    self.omega_frac,
                )
            }
            other => Err(Error::InvalidInput(format!(
                "dataset kind `{other}` is neither `synthetic` nor `csv`"
            ))),
        }
    }
}

/// Grid-study section of an experiment spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSettings {
    /// Training repetitions per configuration.
    pub repeats: usize,
    /// Early-stopping patience, in epochs without a new best validation
    /// accuracy.
    pub patience: usize,
    pub max_epochs: usize,
    /// Include the homogeneous configurations (every operation index, or
    /// the four standard widths).
    pub include_homogeneous: bool,
    /// Extra quantization configurations: per-layer operation counts.
    pub extra_quant: Vec<Vec<Vec<usize>>>,
    /// Extra pruning configurations: per-layer active filter counts.
    pub extra_widths: Vec<Vec<usize>>,
}

impl Default for GridSettings {
    fn default() -> Self {
        Self {
            repeats: 3,
            patience: 15,
            max_epochs: 40,
            include_homogeneous: true,
            extra_quant: Vec::new(),
            extra_widths: Vec::new(),
        }
    }
}

/// Interpolation-loss section: anchor ratios, sessions per anchor, training
/// epochs per session, and an optional cache file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InterpSettings {
    pub ratios: Vec<f64>,
    pub sessions: usize,
    pub epochs: usize,
    /// Anchor table cache, relative to the spec file; reused when present.
    pub table: Option<PathBuf>,
}

impl Default for InterpSettings {
    fn default() -> Self {
        Self {
            ratios: vec![0.25, 0.5, 0.75, 1.0],
            sessions: 5,
            epochs: 3,
            table: None,
        }
    }
}

/// A full experiment: architecture, algorithm, dataset, and settings.
/// The top-level `seed` is authoritative; it is copied into the search and
/// training settings on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub arch: PathBuf,
    pub algorithm: Algorithm,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub dataset: DatasetSpec,
    #[serde(default)]
    pub search: SearchSettings,
    #[serde(default)]
    pub grid: GridSettings,
    #[serde(default)]
    pub interp: InterpSettings,
}

impl ExperimentSpec {
    /// Parses a spec file and resolves seeds. `base_dir` (the spec's
    /// directory) anchors relative paths.
    pub fn load(path: &Path) -> Result<(Self, PathBuf)> {
        let text = read_file(path)?;
        let mut spec: ExperimentSpec = toml::from_str(&text).map_err(|e| parse_err(path, e))?;
        spec.search.seed = spec.seed;
        spec.search.train.seed = spec.seed;
        let base = path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        Ok((spec, base))
    }

    pub fn override_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.search.seed = seed;
        self.search.train.seed = seed;
    }
}

// ---------------------------------------------------------------------------
// Parameter and configuration files (JSON).

/// Reads distribution parameters: `{"family": "...", "layers": [[...], ...]}`.
pub fn load_alpha(path: &Path) -> Result<AlphaParams> {
    let text = read_file(path)?;
    serde_json::from_str(&text).map_err(|e| parse_err(path, e))
}

/// Reads a network configuration: `{"per_layer": [...]}` with count arrays
/// for quantization layers and sampled width values for pruning layers.
pub fn load_config(path: &Path) -> Result<NetworkConfig> {
    let text = read_file(path)?;
    serde_json::from_str(&text).map_err(|e| parse_err(path, e))
}
