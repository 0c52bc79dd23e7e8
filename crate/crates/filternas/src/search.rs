//! Sampled score-function gradient estimation and the five search
//! procedures over compression configurations.
//!
//! All procedures share one loop shape: interleave weight training with
//! passes over the search split in which a configuration subset is sampled,
//! evaluated, and used for one stochastic gradient step on the distribution
//! parameters. They differ in how weights are provided to the evaluated
//! configurations: trained shared weights (quantization), slimmable shared
//! weights plus short fine-tuning, periodically reinitialized shared
//! weights, private from-scratch weights, and private weights scored by the
//! interpolation loss.
//!
//! An iteration in trace records and convergence checks is one update of
//! the distribution parameters; the `outer` field counts passes of the
//! enclosing train/update loop.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arch::{
    make_homogeneous, ArchitectureSpec, HomogeneousTarget, LayerConfig, NetworkConfig,
};
use crate::complexity::{network_total, ComplexityOptions};
use crate::dist::{sample_network, AlphaParams, Family, LayerProbs};
use crate::error::{Error, Result};
use crate::net::{
    batch_ce, fine_tune, init_weights, slimmable_train_step, train_epochs, train_step, Dataset,
    Selection, SgdMomentum, TrainSettings, Weights,
};
use crate::objective::{combined_loss, config_interpolation_loss, InterpTable, LossBreakdown};
use crate::sigma::Sigma;
use crate::util::{derive_seed, round_half_away};

/// Sampled configurations with their evaluated losses, aligned by index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub configs: Vec<NetworkConfig>,
    pub losses: Vec<f64>,
}

/// Settings shared by every search procedure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSettings {
    /// Configurations sampled per parameter update.
    pub sample_size: usize,
    /// Complexity weight in the combined loss.
    pub lambda: f64,
    pub sigma: Sigma,
    /// Homogeneous complexity target; required when lambda > 0.
    pub target: Option<HomogeneousTarget>,
    /// Learning rate for the distribution parameters.
    pub alpha_lr: f64,
    /// Epochs per weight-training phase.
    pub weight_epochs: usize,
    /// Train weights once every this many outer iterations (reset variant).
    pub weight_every: usize,
    pub fine_tune_epochs: usize,
    /// Outer iterations (weight phase plus search-split pass).
    pub max_iterations: usize,
    /// Stop when the largest parameter move stays below this threshold for
    /// `convergence_window` consecutive updates.
    pub convergence_threshold: f64,
    pub convergence_window: usize,
    /// Initial success probability for binomial parameters (0.5 when unset).
    pub init_prob: Option<f64>,
    pub complexity: ComplexityOptions,
    pub train: TrainSettings,
    pub seed: u64,
}

impl Default for SearchSettings {
    fn default() -> Self {
        Self {
            sample_size: 6,
            lambda: 0.0,
            sigma: Sigma::Hinge,
            target: None,
            alpha_lr: 0.05,
            weight_epochs: 1,
            weight_every: 10,
            fine_tune_epochs: 5,
            max_iterations: 20,
            convergence_threshold: 1e-3,
            convergence_window: 10,
            init_prob: None,
            complexity: ComplexityOptions::default(),
            train: TrainSettings::default(),
            seed: 0,
        }
    }
}

impl SearchSettings {
    pub fn validate(&self) -> Result<()> {
        if self.sample_size == 0 {
            return Err(Error::InvalidInput("sample_size must be at least 1".into()));
        }
        if !self.alpha_lr.is_finite() || self.alpha_lr <= 0.0 {
            return Err(Error::InvalidInput("alpha_lr must be positive".into()));
        }
        if self.lambda < 0.0 {
            return Err(Error::InvalidInput("lambda must be nonnegative".into()));
        }
        if self.lambda > 0.0 && self.target.is_none() {
            return Err(Error::InvalidInput(
                "a complexity target is required when lambda > 0".into(),
            ));
        }
        if self.weight_every == 0 || self.convergence_window == 0 {
            return Err(Error::InvalidInput(
                "weight_every and convergence_window must be at least 1".into(),
            ));
        }
        self.train.validate()
    }
}

/// One evaluated sample inside a trace record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub config: NetworkConfig,
    /// Total arithmetic complexity of the configuration.
    pub z: f64,
    pub loss: LossBreakdown,
}

/// One parameter update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    /// Parameter-update index, strictly increasing over the run.
    pub iteration: u64,
    /// Outer loop index the update belongs to.
    pub outer: u64,
    /// Parameters after the update.
    pub alpha: Vec<Vec<f64>>,
    pub samples: Vec<SampleRecord>,
    pub gradient: Vec<Vec<f64>>,
    /// Expected configuration (binomial runs only).
    pub expected: Option<NetworkConfig>,
    /// Cumulative count of weight-training events so far (training phases
    /// for shared-weight procedures, per-configuration trainings for the
    /// private-weight ones).
    pub weight_rounds: u64,
    /// Milliseconds since the run started; excluded from determinism
    /// comparisons.
    pub wall_ms: f64,
}

/// Append-only record of a search run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchTrace {
    pub records: Vec<TraceRecord>,
}

impl SearchTrace {
    pub fn weight_rounds(&self) -> u64 {
        self.records.last().map(|r| r.weight_rounds).unwrap_or(0)
    }

    /// Copy with wall-clock fields zeroed, for determinism comparisons.
    pub fn strip_wall(&self) -> SearchTrace {
        let mut copy = self.clone();
        for r in &mut copy.records {
            r.wall_ms = 0.0;
        }
        copy
    }

    /// One JSON record per line.
    pub fn write_jsonl(&self, path: &std::path::Path) -> Result<()> {
        use std::io::Write;
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        for record in &self.records {
            let line = serde_json::to_string(record).map_err(|e| Error::Parse {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
            writeln!(file, "{line}")?;
        }
        Ok(())
    }

    pub fn read_jsonl(path: &std::path::Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::FileNotFound(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path)?;
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            records.push(serde_json::from_str(line).map_err(|e| Error::Parse {
                path: path.display().to_string(),
                message: format!("line {}: {e}", i + 1),
            })?);
        }
        Ok(SearchTrace { records })
    }
}

/// Score-function gradient estimate: the sample mean of loss times score,
/// shaped like the parameters. Unbiased for the expected-loss gradient.
pub fn estimate_gradient(
    arch: &ArchitectureSpec,
    alpha: &AlphaParams,
    sample: &SampleSet,
) -> Result<Vec<Vec<f64>>> {
    if sample.configs.is_empty() || sample.configs.len() != sample.losses.len() {
        return Err(Error::InvalidInput(
            "sample set must be non-empty with aligned losses".into(),
        ));
    }
    alpha.validate(arch)?;
    for (i, &loss) in sample.losses.iter().enumerate() {
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { index: i, value: loss });
        }
    }
    let probs: Vec<LayerProbs> = (0..arch.layers.len()).map(|l| alpha.layer_probs(l)).collect();
    let mut grad: Vec<Vec<f64>> = alpha.layers.iter().map(|v| vec![0.0; v.len()]).collect();
    for (cfg, &loss) in sample.configs.iter().zip(&sample.losses) {
        cfg.validate(arch)?;
        for (l, layer) in arch.layers.iter().enumerate() {
            match (&cfg.per_layer[l], &probs[l]) {
                (LayerConfig::Quant(counts), LayerProbs::Multinomial(p)) => {
                    for (t, g) in grad[l].iter_mut().enumerate() {
                        *g += loss * (counts[t] as f64 - layer.filters as f64 * p[t]);
                    }
                }
                (LayerConfig::Prune(a), LayerProbs::Binomial(p)) => {
                    grad[l][0] += loss * (*a as f64 - (layer.filters as f64 - 1.0) * p);
                }
                _ => {
                    return Err(Error::InvalidConfig(
                        "sampled configuration does not match the parameter family".into(),
                    ))
                }
            }
        }
    }
    let scale = 1.0 / sample.configs.len() as f64;
    for layer in &mut grad {
        for g in layer.iter_mut() {
            *g *= scale;
        }
    }
    Ok(grad)
}

/// One descent step on the distribution parameters.
pub fn alpha_step(alpha: &AlphaParams, gradient: &[Vec<f64>], rate: f64) -> Result<AlphaParams> {
    if gradient.len() != alpha.layers.len()
        || gradient
            .iter()
            .zip(&alpha.layers)
            .any(|(g, a)| g.len() != a.len())
    {
        return Err(Error::ShapeMismatch(
            "gradient shape does not match the parameters".into(),
        ));
    }
    let mut next = alpha.clone();
    for (layer, g) in next.layers.iter_mut().zip(gradient) {
        for (a, &gv) in layer.iter_mut().zip(g) {
            *a -= rate * gv;
        }
    }
    Ok(next)
}

/// Rounded mean of each layer's width distribution, as a configuration.
/// Defined for the binomial family only.
pub fn expected_config(arch: &ArchitectureSpec, alpha: &AlphaParams) -> Result<NetworkConfig> {
    alpha.validate(arch)?;
    if alpha.family != Family::Binomial {
        return Err(Error::InvalidInput(
            "expected configurations are defined for the binomial family".into(),
        ));
    }
    let per_layer = arch
        .layers
        .iter()
        .enumerate()
        .map(|(l, layer)| {
            let p = alpha.layer_probs(l).as_binomial().expect("binomial family");
            let mean = (layer.filters as f64 - 1.0) * p;
            let value = (round_half_away(mean) as usize).min(layer.filters - 1);
            LayerConfig::Prune(value)
        })
        .collect();
    Ok(NetworkConfig::new(per_layer))
}

/// Mean operation counts per layer under a multinomial distribution.
pub fn expected_counts(arch: &ArchitectureSpec, alpha: &AlphaParams) -> Result<Vec<Vec<f64>>> {
    alpha.validate(arch)?;
    if alpha.family != Family::Multinomial {
        return Err(Error::InvalidInput(
            "expected counts are defined for the multinomial family".into(),
        ));
    }
    Ok(arch
        .layers
        .iter()
        .enumerate()
        .map(|(l, layer)| {
            let p = alpha.layer_probs(l);
            p.as_multinomial()
                .expect("multinomial family")
                .iter()
                .map(|&pi| layer.filters as f64 * pi)
                .collect()
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Shared run plumbing.

struct Convergence {
    window: usize,
    threshold: f64,
    moves: std::collections::VecDeque<f64>,
}

impl Convergence {
    fn new(settings: &SearchSettings) -> Self {
        Convergence {
            window: settings.convergence_window,
            threshold: settings.convergence_threshold,
            moves: std::collections::VecDeque::new(),
        }
    }

    fn push(&mut self, delta: f64) -> bool {
        if self.moves.len() == self.window {
            self.moves.pop_front();
        }
        self.moves.push_back(delta);
        self.moves.len() == self.window && self.moves.iter().all(|&d| d < self.threshold)
    }
}

struct Run<'a> {
    arch: &'a ArchitectureSpec,
    settings: &'a SearchSettings,
    target: Option<NetworkConfig>,
    trace: SearchTrace,
    convergence: Convergence,
    iteration: u64,
    weight_rounds: u64,
    started: Instant,
    done: bool,
}

impl<'a> Run<'a> {
    fn new(
        arch: &'a ArchitectureSpec,
        settings: &'a SearchSettings,
    ) -> Result<Self> {
        settings.validate()?;
        arch.validate()?;
        let target = settings
            .target
            .map(|t| make_homogeneous(arch, t))
            .transpose()?;
        Ok(Run {
            arch,
            settings,
            target,
            trace: SearchTrace::default(),
            convergence: Convergence::new(settings),
            iteration: 0,
            weight_rounds: 0,
            started: Instant::now(),
            done: false,
        })
    }

    fn initial_alpha(&self) -> Result<AlphaParams> {
        if Family::of(self.arch) == Family::Binomial {
            AlphaParams::from_prob(self.arch, self.settings.init_prob.unwrap_or(0.5))
        } else {
            Ok(AlphaParams::uniform(self.arch))
        }
    }

    fn breakdown(&self, ce: f64, cfg: &NetworkConfig) -> Result<LossBreakdown> {
        match &self.target {
            Some(target) => combined_loss(
                ce,
                self.arch,
                cfg,
                target,
                self.settings.lambda,
                self.settings.sigma,
                &self.settings.complexity,
            ),
            None => Ok(LossBreakdown {
                ce,
                complexity: 0.0,
                combined: ce,
                lambda: self.settings.lambda,
            }),
        }
    }

    /// Applies one parameter update and records it. Returns the new
    /// parameters; sets `done` on convergence.
    fn step(
        &mut self,
        alpha: &AlphaParams,
        outer: u64,
        samples: Vec<SampleRecord>,
        expected: Option<NetworkConfig>,
    ) -> Result<AlphaParams> {
        let sample_set = SampleSet {
            configs: samples.iter().map(|s| s.config.clone()).collect(),
            losses: samples.iter().map(|s| s.loss.combined).collect(),
        };
        let gradient = estimate_gradient(self.arch, alpha, &sample_set)?;
        let next = alpha_step(alpha, &gradient, self.settings.alpha_lr)?;
        self.iteration += 1;
        self.trace.records.push(TraceRecord {
            iteration: self.iteration,
            outer,
            alpha: next.layers.clone(),
            samples,
            gradient,
            expected,
            weight_rounds: self.weight_rounds,
            wall_ms: self.started.elapsed().as_secs_f64() * 1000.0,
        });
        if self.convergence.push(next.max_abs_diff(alpha)) {
            self.done = true;
        }
        Ok(next)
    }

    fn sample_record(&self, cfg: &NetworkConfig, ce: f64) -> Result<SampleRecord> {
        let (_, _, z) = network_total(self.arch, cfg, &self.settings.complexity)?;
        Ok(SampleRecord {
            config: cfg.clone(),
            z,
            loss: self.breakdown(ce, cfg)?,
        })
    }
}

fn standard_widths(arch: &ArchitectureSpec) -> Result<Vec<NetworkConfig>> {
    [0.25, 0.5, 0.75, 1.0]
        .iter()
        .map(|&r| make_homogeneous(arch, HomogeneousTarget::WidthRatio(r)))
        .collect()
}

fn require_family(arch: &ArchitectureSpec, family: Family) -> Result<()> {
    if Family::of(arch) != family {
        return Err(Error::InvalidConfig(match family {
            Family::Multinomial => "this procedure needs a quantization architecture".into(),
            Family::Binomial => "this procedure needs a pruning architecture".into(),
        }));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Search procedures.

/// Quantization search: alternates weight-training epochs (one sampled
/// configuration per batch, cross-entropy step) with passes over the search
/// split that update the distribution parameters from sampled subsets.
pub fn run_quant_search(
    arch: &ArchitectureSpec,
    data: &Dataset,
    settings: &SearchSettings,
) -> Result<(AlphaParams, SearchTrace)> {
    require_family(arch, Family::Multinomial)?;
    let mut run = Run::new(arch, settings)?;
    let mut alpha = run.initial_alpha()?;
    let mut weights = init_weights(arch, derive_seed(settings.seed, "weights", 0, 0))?;
    let mut opt = SgdMomentum::new(&weights);

    'outer: for k in 0..settings.max_iterations as u64 {
        let mut wrng = ChaCha8Rng::seed_from_u64(derive_seed(settings.seed, "wsample", k, 0));
        for _ in 0..settings.weight_epochs {
            for batch in data.batches(Selection::Omega, settings.train.batch_size) {
                let cfg = sample_network(arch, &alpha, &mut wrng);
                train_step(arch, &mut weights, &mut opt, Some(&cfg), data, &batch, &settings.train)?;
            }
        }
        run.weight_rounds += 1;

        let mut arng = ChaCha8Rng::seed_from_u64(derive_seed(settings.seed, "asample", k, 0));
        for batch in data.batches(Selection::Alpha, settings.train.batch_size) {
            let configs: Vec<NetworkConfig> = (0..settings.sample_size)
                .map(|_| sample_network(arch, &alpha, &mut arng))
                .collect();
            let mut samples = Vec::with_capacity(configs.len());
            for cfg in &configs {
                let ce = batch_ce(arch, &weights, Some(cfg), data, &batch)?;
                samples.push(run.sample_record(cfg, ce)?);
            }
            alpha = run.step(&alpha, k, samples, None)?;
            if run.done {
                break 'outer;
            }
        }
    }
    Ok((alpha, run.trace))
}

/// Basic pruning search: slimmable training of the shared weights on the
/// four standard widths plus the expected configuration, then parameter
/// updates from configurations fine-tuned on private copies.
pub fn run_prune_basic(
    arch: &ArchitectureSpec,
    data: &Dataset,
    settings: &SearchSettings,
) -> Result<(AlphaParams, SearchTrace)> {
    require_family(arch, Family::Binomial)?;
    let mut run = Run::new(arch, settings)?;
    let mut alpha = run.initial_alpha()?;
    let mut weights = init_weights(arch, derive_seed(settings.seed, "weights", 0, 0))?;
    let mut opt = SgdMomentum::new(&weights);
    let widths = standard_widths(arch)?;

    'outer: for k in 0..settings.max_iterations as u64 {
        let expected = expected_config(arch, &alpha)?;
        let mut set = widths.clone();
        if !set.contains(&expected) {
            set.push(expected.clone());
        }
        for _ in 0..settings.weight_epochs {
            for batch in data.batches(Selection::Omega, settings.train.batch_size) {
                slimmable_train_step(arch, &mut weights, &mut opt, &set, data, &batch, &settings.train)?;
            }
        }
        run.weight_rounds += 1;

        let mut arng = ChaCha8Rng::seed_from_u64(derive_seed(settings.seed, "asample", k, 0));
        for batch in data.batches(Selection::Alpha, settings.train.batch_size) {
            let configs: Vec<NetworkConfig> = (0..settings.sample_size)
                .map(|_| sample_network(arch, &alpha, &mut arng))
                .collect();
            let tuned: Vec<Weights> = configs
                .par_iter()
                .map(|cfg| {
                    fine_tune(
                        arch,
                        &weights,
                        cfg,
                        data,
                        Selection::Omega,
                        settings.fine_tune_epochs,
                        &settings.train,
                    )
                })
                .collect::<Result<_>>()?;
            let mut samples = Vec::with_capacity(configs.len());
            for (cfg, w) in configs.iter().zip(&tuned) {
                let ce = batch_ce(arch, w, Some(cfg), data, &batch)?;
                samples.push(run.sample_record(cfg, ce)?);
            }
            alpha = run.step(&alpha, k, samples, Some(expected.clone()))?;
            if run.done {
                break 'outer;
            }
        }
    }
    Ok((alpha, run.trace))
}

/// Pruning search with periodic weight resets: once every `weight_every`
/// outer iterations the shared weights restart from fresh random values and
/// retrain slimmably on the whole training set; sampling, fine-tuning, and
/// parameter updates also use the whole set.
pub fn run_prune_reset(
    arch: &ArchitectureSpec,
    data: &Dataset,
    settings: &SearchSettings,
) -> Result<(AlphaParams, SearchTrace)> {
    require_family(arch, Family::Binomial)?;
    let mut run = Run::new(arch, settings)?;
    let mut alpha = run.initial_alpha()?;
    // The reset branch fires at iteration 0, so shared state starts there.
    let mut shared: Option<(Weights, SgdMomentum)> = None;
    let widths = standard_widths(arch)?;

    'outer: for k in 0..settings.max_iterations as u64 {
        let expected = expected_config(arch, &alpha)?;
        if k % settings.weight_every as u64 == 0 {
            let mut weights = init_weights(arch, derive_seed(settings.seed, "reset", k, 0))?;
            let mut opt = SgdMomentum::new(&weights);
            let mut set = widths.clone();
            if !set.contains(&expected) {
                set.push(expected.clone());
            }
            for _ in 0..settings.weight_epochs {
                for batch in data.batches(Selection::Train, settings.train.batch_size) {
                    slimmable_train_step(
                        arch, &mut weights, &mut opt, &set, data, &batch, &settings.train,
                    )?;
                }
            }
            run.weight_rounds += 1;
            shared = Some((weights, opt));
        }
        let weights = &shared.as_ref().expect("reset fires at iteration 0").0;

        let mut arng = ChaCha8Rng::seed_from_u64(derive_seed(settings.seed, "asample", k, 0));
        let configs: Vec<NetworkConfig> = (0..settings.sample_size)
            .map(|_| sample_network(arch, &alpha, &mut arng))
            .collect();
        let tuned: Vec<Weights> = configs
            .par_iter()
            .map(|cfg| {
                fine_tune(
                    arch,
                    weights,
                    cfg,
                    data,
                    Selection::Train,
                    settings.fine_tune_epochs,
                    &settings.train,
                )
            })
            .collect::<Result<_>>()?;

        for batch in data.batches(Selection::Train, settings.train.batch_size) {
            let mut samples = Vec::with_capacity(configs.len());
            for (cfg, w) in configs.iter().zip(&tuned) {
                let ce = batch_ce(arch, w, Some(cfg), data, &batch)?;
                samples.push(run.sample_record(cfg, ce)?);
            }
            alpha = run.step(&alpha, k, samples, Some(expected.clone()))?;
            if run.done {
                break 'outer;
            }
        }
    }
    Ok((alpha, run.trace))
}

fn train_private_weights(
    arch: &ArchitectureSpec,
    data: &Dataset,
    settings: &SearchSettings,
    configs: &[NetworkConfig],
    outer: u64,
) -> Result<Vec<Weights>> {
    configs
        .par_iter()
        .enumerate()
        .map(|(i, cfg)| {
            let seed = derive_seed(settings.seed, "private", outer, i as u64);
            let mut w = init_weights(arch, seed)?;
            let mut opt = SgdMomentum::new(&w);
            train_epochs(
                arch,
                &mut w,
                &mut opt,
                Some(cfg),
                data,
                Selection::Train,
                settings.weight_epochs,
                &settings.train,
            )?;
            Ok(w)
        })
        .collect()
}

/// Pruning search without weight sharing: every sampled configuration
/// trains from scratch with its own weights, seeded from (master seed,
/// outer iteration, sample index).
pub fn run_prune_noshare(
    arch: &ArchitectureSpec,
    data: &Dataset,
    settings: &SearchSettings,
) -> Result<(AlphaParams, SearchTrace)> {
    require_family(arch, Family::Binomial)?;
    let mut run = Run::new(arch, settings)?;
    let mut alpha = run.initial_alpha()?;

    'outer: for k in 0..settings.max_iterations as u64 {
        let expected = expected_config(arch, &alpha)?;
        let mut arng = ChaCha8Rng::seed_from_u64(derive_seed(settings.seed, "asample", k, 0));
        let configs: Vec<NetworkConfig> = (0..settings.sample_size)
            .map(|_| sample_network(arch, &alpha, &mut arng))
            .collect();
        let trained = train_private_weights(arch, data, settings, &configs, k)?;
        run.weight_rounds += configs.len() as u64;

        for batch in data.batches(Selection::Train, settings.train.batch_size) {
            let mut samples = Vec::with_capacity(configs.len());
            for (cfg, w) in configs.iter().zip(&trained) {
                let ce = batch_ce(arch, w, Some(cfg), data, &batch)?;
                samples.push(run.sample_record(cfg, ce)?);
            }
            alpha = run.step(&alpha, k, samples, Some(expected.clone()))?;
            if run.done {
                break 'outer;
            }
        }
    }
    Ok((alpha, run.trace))
}

/// Pruning search scored by the interpolation loss: identical control flow
/// to the no-sharing variant, with `sigma(ce - interpolated anchor ce)` in
/// place of the combined loss. There is no explicit complexity term.
pub fn run_prune_interp(
    arch: &ArchitectureSpec,
    data: &Dataset,
    settings: &SearchSettings,
    table: &InterpTable,
) -> Result<(AlphaParams, SearchTrace)> {
    require_family(arch, Family::Binomial)?;
    let mut run = Run::new(arch, settings)?;
    let mut alpha = run.initial_alpha()?;

    'outer: for k in 0..settings.max_iterations as u64 {
        let expected = expected_config(arch, &alpha)?;
        let mut arng = ChaCha8Rng::seed_from_u64(derive_seed(settings.seed, "asample", k, 0));
        let configs: Vec<NetworkConfig> = (0..settings.sample_size)
            .map(|_| sample_network(arch, &alpha, &mut arng))
            .collect();
        let trained = train_private_weights(arch, data, settings, &configs, k)?;
        run.weight_rounds += configs.len() as u64;

        for batch in data.batches(Selection::Train, settings.train.batch_size) {
            let mut samples = Vec::with_capacity(configs.len());
            for (cfg, w) in configs.iter().zip(&trained) {
                let ce = batch_ce(arch, w, Some(cfg), data, &batch)?;
                let loss = config_interpolation_loss(
                    ce,
                    arch,
                    cfg,
                    table,
                    settings.sigma,
                    &settings.complexity,
                )?;
                let (_, _, z) = network_total(arch, cfg, &settings.complexity)?;
                samples.push(SampleRecord {
                    config: cfg.clone(),
                    z,
                    loss: LossBreakdown {
                        ce,
                        complexity: 0.0,
                        combined: loss,
                        lambda: 0.0,
                    },
                });
            }
            alpha = run.step(&alpha, k, samples, Some(expected.clone()))?;
            if run.done {
                break 'outer;
            }
        }
    }
    Ok((alpha, run.trace))
}
