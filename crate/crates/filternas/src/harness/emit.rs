//! Result emission: line-delimited records, flat CSV tables, and plot data
//! pairing the homogeneous baseline curve with heterogeneous scatter
//! points. Every numeric value is checked finite before anything is
//! written.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::grid::GridResult;
use crate::search::SearchTrace;

fn ensure_finite(value: f64, context: &str) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFiniteOutput(format!("{context} = {value}")))
    }
}

fn create(dir: &Path, name: &str) -> Result<(PathBuf, std::io::BufWriter<std::fs::File>)> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let file = std::fs::File::create(&path)?;
    Ok((path, std::io::BufWriter::new(file)))
}

#[derive(Serialize)]
struct PlotData<'a> {
    /// Homogeneous rows as (z, mean accuracy) pairs, z ascending.
    baseline: Vec<(f64, f64)>,
    scatter: Vec<ScatterPoint<'a>>,
}

#[derive(Serialize)]
struct ScatterPoint<'a> {
    config_id: &'a str,
    z: f64,
    mean_acc: f64,
    ci_half: f64,
}

/// Writes `records.jsonl`, `table.csv`
/// (`config_id,z,mean_acc,ci_half,homogeneous`), and `plot.json` under
/// `dir`. Byte-identical across runs for identical results.
pub fn emit_grid(results: &[GridResult], dir: &Path) -> Result<Vec<PathBuf>> {
    for r in results {
        ensure_finite(r.z, &format!("{} z", r.config_id))?;
        ensure_finite(r.mean, &format!("{} mean", r.config_id))?;
        ensure_finite(r.ci_half, &format!("{} ci_half", r.config_id))?;
        for (i, s) in r.samples.iter().enumerate() {
            ensure_finite(*s, &format!("{} sample {i}", r.config_id))?;
        }
    }

    let (records_path, mut records) = create(dir, "records.jsonl")?;
    for r in results {
        let line = serde_json::to_string(r).map_err(|e| Error::Parse {
            path: records_path.display().to_string(),
            message: e.to_string(),
        })?;
        writeln!(records, "{line}")?;
    }
    records.flush()?;

    let (table_path, table_file) = create(dir, "table.csv")?;
    let mut table = csv::Writer::from_writer(table_file);
    table.write_record(["config_id", "z", "mean_acc", "ci_half", "homogeneous"])?;
    for r in results {
        table.write_record([
            r.config_id.as_str(),
            &r.z.to_string(),
            &r.mean.to_string(),
            &r.ci_half.to_string(),
            &r.homogeneous.to_string(),
        ])?;
    }
    table.flush()?;

    let mut baseline: Vec<(f64, f64)> = results
        .iter()
        .filter(|r| r.homogeneous)
        .map(|r| (r.z, r.mean))
        .collect();
    baseline.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite values"));
    let scatter: Vec<ScatterPoint> = results
        .iter()
        .filter(|r| !r.homogeneous)
        .map(|r| ScatterPoint {
            config_id: &r.config_id,
            z: r.z,
            mean_acc: r.mean,
            ci_half: r.ci_half,
        })
        .collect();
    let (plot_path, mut plot) = create(dir, "plot.json")?;
    let body = serde_json::to_string_pretty(&PlotData { baseline, scatter }).map_err(|e| {
        Error::Parse {
            path: plot_path.display().to_string(),
            message: e.to_string(),
        }
    })?;
    plot.write_all(body.as_bytes())?;
    plot.write_all(b"\n")?;
    plot.flush()?;

    Ok(vec![records_path, table_path, plot_path])
}

/// Writes a search trace as `trace.jsonl` after checking finiteness of
/// every recorded number.
pub fn emit_trace(trace: &SearchTrace, dir: &Path) -> Result<PathBuf> {
    for r in &trace.records {
        for (l, layer) in r.alpha.iter().enumerate() {
            for (i, v) in layer.iter().enumerate() {
                ensure_finite(*v, &format!("iteration {} alpha[{l}][{i}]", r.iteration))?;
            }
        }
        for (l, layer) in r.gradient.iter().enumerate() {
            for (i, v) in layer.iter().enumerate() {
                ensure_finite(*v, &format!("iteration {} gradient[{l}][{i}]", r.iteration))?;
            }
        }
        for (i, s) in r.samples.iter().enumerate() {
            ensure_finite(s.z, &format!("iteration {} sample {i} z", r.iteration))?;
            ensure_finite(
                s.loss.combined,
                &format!("iteration {} sample {i} loss", r.iteration),
            )?;
        }
    }
    std::fs::create_dir_all(dir)?;
    let path = dir.join("trace.jsonl");
    trace.write_jsonl(&path)?;
    Ok(path)
}
