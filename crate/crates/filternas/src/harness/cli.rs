//! Command-line interface: `search`, `grid`, `bops`, `oracle-check`, and
//! `sample` subcommands with global `--seed`, `--out`, and `--threads`
//! flags. Exit codes: 0 success, 1 runtime failure, 2 usage or input-file
//! problems.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::arch::{make_homogeneous, ArchitectureSpec, HomogeneousTarget, NetworkConfig};
use crate::complexity::{complexity_report, ComplexityOptions};
use crate::dist::{sample_network, Family};
use crate::error::{Error, Result};
use crate::harness::check::run_oracle_check;
use crate::harness::emit::{emit_grid, emit_trace};
use crate::harness::files::{
    load_alpha, load_arch, load_config, Algorithm, ExperimentSpec,
};
use crate::harness::grid::{grid_configs, run_grid_study};
use crate::objective::InterpTable;
use crate::search::{
    expected_config, run_prune_basic, run_prune_interp, run_prune_noshare, run_prune_reset,
    run_quant_search,
};
use crate::util::derive_seed;

#[derive(Debug, Parser)]
#[command(
    name = "filternas",
    about = "Differentiable search over filter-level compression configurations",
    version
)]
struct Cli {
    /// Override the seed declared in the experiment spec.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for traces and result tables.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a search procedure from an experiment spec.
    Search {
        #[arg(long)]
        spec: PathBuf,
    },
    /// Run the grid variance study from an experiment spec.
    Grid {
        #[arg(long)]
        spec: PathBuf,
    },
    /// Print the complexity report of a configuration.
    Bops(BopsArgs),
    /// Verify the analytic derivatives against brute force and finite
    /// differences on randomized small instances.
    OracleCheck {
        #[arg(long, default_value_t = 100)]
        instances: usize,
    },
    /// Draw configurations from a parameter file and print them.
    Sample {
        #[arg(long)]
        arch: PathBuf,
        #[arg(long)]
        alpha: PathBuf,
        #[arg(long, default_value_t = 8)]
        count: usize,
    },
}

#[derive(Debug, Args)]
struct BopsArgs {
    #[arg(long)]
    arch: PathBuf,
    /// Configuration file (JSON); or use --op-index / --ratio.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Homogeneous configuration at this operation index.
    #[arg(long)]
    op_index: Option<usize>,
    /// Homogeneous configuration at this width ratio.
    #[arg(long)]
    ratio: Option<f64>,
    /// Target for the ratio column; defaults to the configuration itself.
    #[arg(long)]
    target_op_index: Option<usize>,
    #[arg(long)]
    target_ratio: Option<f64>,
    /// Leave the parameter fetch cost out of the totals.
    #[arg(long)]
    no_memory: bool,
    #[arg(long, default_value_t = 8)]
    input_bits: u32,
}

/// Entry point: parses arguments, dispatches, and maps errors to exit
/// codes. Usage and missing-input problems exit 2, runtime failures 1.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap reports --help/--version through Err as well; use its
            // own exit code (0 for help, 2 for usage errors).
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Some(threads) = cli.threads {
        // A pool may already exist when embedded in tests; that is fine.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::FileNotFound(_) | Error::Parse { .. } => 2,
                _ => 1,
            }
        }
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Search { spec } => cmd_search(spec, cli.seed, &cli.out),
        Command::Grid { spec } => cmd_grid(spec, cli.seed, &cli.out),
        Command::Bops(args) => cmd_bops(args),
        Command::OracleCheck { instances } => cmd_oracle_check(cli.seed.unwrap_or(0), *instances),
        Command::Sample { arch, alpha, count } => {
            cmd_sample(arch, alpha, *count, cli.seed.unwrap_or(0))
        }
    }
}

fn load_experiment(path: &Path, seed: Option<u64>) -> Result<(ExperimentSpec, PathBuf, ArchitectureSpec)> {
    let (mut spec, base) = ExperimentSpec::load(path)?;
    if let Some(seed) = seed {
        spec.override_seed(seed);
    }
    let arch = load_arch(&base.join(&spec.arch))?;
    Ok((spec, base, arch))
}

fn cmd_search(spec_path: &Path, seed: Option<u64>, out: &Path) -> Result<()> {
    let (spec, base, arch) = load_experiment(spec_path, seed)?;
    let data = spec.dataset.build(&base, derive_seed(spec.seed, "data", 0, 0))?;

    let (alpha, trace) = match spec.algorithm {
        Algorithm::Quant => run_quant_search(&arch, &data, &spec.search)?,
        Algorithm::PruneBasic => run_prune_basic(&arch, &data, &spec.search)?,
        Algorithm::PruneReset => run_prune_reset(&arch, &data, &spec.search)?,
        Algorithm::PruneNoshare => run_prune_noshare(&arch, &data, &spec.search)?,
        Algorithm::PruneInterp => {
            let table = interp_table(&spec, &base, &arch, &data)?;
            run_prune_interp(&arch, &data, &spec.search, &table)?
        }
    };

    let trace_path = emit_trace(&trace, out)?;
    let alpha_path = out.join("alpha.json");
    std::fs::write(
        &alpha_path,
        serde_json::to_string_pretty(&alpha).map_err(|e| Error::Parse {
            path: alpha_path.display().to_string(),
            message: e.to_string(),
        })? + "\n",
    )?;

    println!("algorithm: {}", spec.algorithm.name());
    println!("iterations: {}", trace.records.len());
    println!("weight-training events: {}", trace.weight_rounds());
    for (l, layer) in alpha.layers.iter().enumerate() {
        let probs = alpha.layer_probs(l);
        println!("layer {l}: alpha {layer:?}, probabilities {probs:?}");
    }
    if alpha.family == Family::Binomial {
        let expected = expected_config(&arch, &alpha)?;
        let widths: Vec<usize> = expected
            .per_layer
            .iter()
            .map(|c| c.active_filters().unwrap_or(0))
            .collect();
        println!("expected widths: {widths:?}");
    }
    println!("trace: {}", trace_path.display());
    println!("alpha: {}", alpha_path.display());
    Ok(())
}

fn interp_table(
    spec: &ExperimentSpec,
    base: &Path,
    arch: &ArchitectureSpec,
    data: &crate::net::Dataset,
) -> Result<InterpTable> {
    if let Some(rel) = &spec.interp.table {
        let path = base.join(rel);
        if path.exists() {
            return InterpTable::read_csv(&path);
        }
        let table = build_interp_table(spec, arch, data)?;
        table.write_csv(&path)?;
        return Ok(table);
    }
    build_interp_table(spec, arch, data)
}

fn build_interp_table(
    spec: &ExperimentSpec,
    arch: &ArchitectureSpec,
    data: &crate::net::Dataset,
) -> Result<InterpTable> {
    InterpTable::build(
        arch,
        data,
        &spec.interp.ratios,
        spec.interp.sessions,
        spec.interp.epochs,
        &spec.search.train,
        derive_seed(spec.seed, "interp", 0, 0),
    )
}

fn cmd_grid(spec_path: &Path, seed: Option<u64>, out: &Path) -> Result<()> {
    let (spec, base, arch) = load_experiment(spec_path, seed)?;
    let data = spec.dataset.build(&base, derive_seed(spec.seed, "data", 0, 0))?;
    let configs = grid_configs(&arch, &spec.grid)?;
    let results = run_grid_study(
        &arch,
        &data,
        &configs,
        &spec.grid,
        &spec.search.train,
        &spec.search.complexity,
        spec.seed,
    )?;
    let files = emit_grid(&results, out)?;
    println!("config_id,z,mean_acc,ci_half,homogeneous");
    for r in &results {
        println!(
            "{},{},{},{},{}",
            r.config_id, r.z, r.mean, r.ci_half, r.homogeneous
        );
        for failure in &r.failures {
            eprintln!("warning: {}: {failure}", r.config_id);
        }
    }
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn resolve_config(
    arch: &ArchitectureSpec,
    config: &Option<PathBuf>,
    op_index: Option<usize>,
    ratio: Option<f64>,
) -> Result<NetworkConfig> {
    match (config, op_index, ratio) {
        (Some(path), None, None) => {
            let cfg = load_config(path)?;
            cfg.validate(arch)?;
            Ok(cfg)
        }
        (None, Some(idx), None) => make_homogeneous(arch, HomogeneousTarget::OpIndex(idx)),
        (None, None, Some(r)) => make_homogeneous(arch, HomogeneousTarget::WidthRatio(r)),
        _ => Err(Error::InvalidInput(
            "give exactly one of --config, --op-index, --ratio".into(),
        )),
    }
}

fn cmd_bops(args: &BopsArgs) -> Result<()> {
    let arch = load_arch(&args.arch)?;
    let cfg = resolve_config(&arch, &args.config, args.op_index, args.ratio)?;
    let target = match (args.target_op_index, args.target_ratio) {
        (Some(idx), None) => make_homogeneous(&arch, HomogeneousTarget::OpIndex(idx))?,
        (None, Some(r)) => make_homogeneous(&arch, HomogeneousTarget::WidthRatio(r))?,
        (None, None) => cfg.clone(),
        _ => {
            return Err(Error::InvalidInput(
                "give at most one of --target-op-index, --target-ratio".into(),
            ))
        }
    };
    let opts = ComplexityOptions {
        include_memory: !args.no_memory,
        input_bits: args.input_bits,
        ..ComplexityOptions::default()
    };
    let report = complexity_report(&arch, &cfg, &target, &opts)?;
    println!("configuration: {}", cfg.id());
    println!("target: {}", target.id());
    for (l, v) in report.per_layer.iter().enumerate() {
        println!("layer {l}: {v}");
    }
    println!("memory: {}", report.memory_cost);
    println!("total: {}", report.total);
    println!("target_total: {}", report.target_total);
    println!("ratio: {}", report.ratio);
    Ok(())
}

fn cmd_oracle_check(seed: u64, instances: usize) -> Result<()> {
    let report = run_oracle_check(seed, instances)?;
    for line in &report.lines {
        println!(
            "{} {} ({})",
            if line.passed { "PASS" } else { "FAIL" },
            line.name,
            line.detail
        );
    }
    if report.all_passed() {
        Ok(())
    } else {
        Err(Error::InvalidInput("verification suite failed".into()))
    }
}

fn cmd_sample(arch_path: &Path, alpha_path: &Path, count: usize, seed: u64) -> Result<()> {
    let arch = load_arch(arch_path)?;
    let alpha = load_alpha(alpha_path)?;
    alpha.validate(&arch)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "sample", 0, 0));
    for _ in 0..count {
        let cfg = sample_network(&arch, &alpha, &mut rng);
        let line = serde_json::to_string(&cfg).map_err(|e| Error::Parse {
            path: "<sample>".into(),
            message: e.to_string(),
        })?;
        println!("{line}");
    }
    Ok(())
}
