use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, ensure, Context};
use decompose::datagen::{correlation_table, score_from_table, CorrelationTarget};
use decompose::Source;
use serde::Serialize;

use crate::io::{read_matrix, write_json};
use crate::synth::load_truth;
use crate::{Failure, ScoreArgs, UsageContext};

#[derive(Debug, Serialize)]
struct ScoreReport {
    score: f64,
    target: CorrelationTarget,
    runs: Vec<PathBuf>,
    /// `correlations[i][n]`: best |ρ| of truth source `i` in run `n`.
    correlations: Vec<Vec<f64>>,
}

fn is_run(dir: &Path) -> bool {
    dir.join("U.csv").is_file() && dir.join("V.csv").is_file()
}

/// A run directory itself, or the sorted run directories beneath it.
fn expand(dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    if is_run(dir) {
        return Ok(vec![dir.to_path_buf()]);
    }
    let entries = fs::read_dir(dir).with_context(|| format!("cannot read {}", dir.display()))?;
    let mut found: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| is_run(p))
        .collect();
    found.sort();
    ensure!(
        !found.is_empty(),
        "{}: no runs found (expected U.csv and V.csv)",
        dir.display()
    );
    Ok(found)
}

fn load_run(dir: &Path, rows: usize, cols: usize) -> anyhow::Result<Vec<Source>> {
    let (m, ku, u) = read_matrix(&dir.join("U.csv"))?;
    let (n, kv, v) = read_matrix(&dir.join("V.csv"))?;
    ensure!(
        m == rows && n == cols && ku == kv,
        "{}: factors are {m}x{ku} and {n}x{kv}, truth is {rows}x{cols}",
        dir.display()
    );
    Ok((0..ku)
        .map(|k| Source {
            index: k,
            spatial: (0..m).map(|i| u[i * ku + k]).collect(),
            temporal: (0..n).map(|j| v[j * kv + k]).collect(),
            variance_explained: 0.0,
        })
        .collect())
}

pub fn cmd_score(args: ScoreArgs) -> Result<(), Failure> {
    let (manifest, truth) = load_truth(&args.truth).usage()?;
    if truth.is_empty() {
        return Err(anyhow!("{}: manifest lists no sources", args.truth.display())).usage();
    }
    let mut dirs = Vec::new();
    for d in &args.runs {
        dirs.extend(expand(d).usage()?);
    }
    let runs = dirs
        .iter()
        .map(|d| load_run(d, manifest.rows, manifest.cols))
        .collect::<anyhow::Result<Vec<_>>>()
        .usage()?;

    let target: CorrelationTarget = args.target.into();
    let table = correlation_table(&truth, &runs, target);
    let score = score_from_table(&table).usage()?;
    let mut stdout = std::io::stdout().lock();
    writeln!(
        stdout,
        "score {score:.6} over {} truth sources and {} runs",
        truth.len(),
        runs.len()
    )?;
    for (i, row) in table.iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|c| format!("{c:.4}")).collect();
        writeln!(stdout, "  source {i}: {}", cells.join(" "))?;
    }

    if let Some(out) = &args.out {
        fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
        let mut csv = csv::Writer::from_path(out.join("correlations.csv"))
            .map_err(|e| anyhow!("cannot write correlations.csv: {e}"))?;
        csv.write_record(["truth_source", "run", "run_dir", "correlation"])
            .map_err(anyhow::Error::from)?;
        for (i, row) in table.iter().enumerate() {
            for (n, c) in row.iter().enumerate() {
                csv.write_record([
                    i.to_string(),
                    n.to_string(),
                    dirs[n].display().to_string(),
                    crate::io::format_f64(*c),
                ])
                .map_err(anyhow::Error::from)?;
            }
        }
        csv.flush()?;
        write_json(
            &out.join("score.json"),
            &ScoreReport {
                score,
                target,
                runs: dirs,
                correlations: table,
            },
        )?;
    }
    Ok(())
}
