use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use decompose::engine::{fit, EngineConfig, EngineEvent, PriorAssignment};
use decompose::lowrank::LowRankConfig;
use decompose::{DataMatrix, PriorSpec};
use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::io::{self, read_json, write_json, write_matrix};
use crate::{Failure, RunArgs, UsageContext};

pub const THREADS_VAR: &str = "DECOMPOSE_THREADS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    /// Not echoed into summaries, so identical runs written to different
    /// places produce identical files.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Number of repeated fits; run `i` uses seed `engine.seed + i`.
    pub runs: usize,
    pub engine: EngineConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input: None,
            out: None,
            runs: 1,
            engine: EngineConfig::default(),
        }
    }
}

impl RunConfig {
    fn apply(&mut self, args: &RunArgs) {
        let e = &mut self.engine;
        if let Some(p) = &args.input {
            self.input = Some(p.clone());
        }
        if let Some(p) = &args.out {
            self.out = Some(p.clone());
        }
        if let Some(k) = args.k {
            e.k = k;
        }
        if let Some(f) = args.prior_u {
            e.priors_u = PriorAssignment::broadcast(f).with_fixed(e.priors_u.fixed);
        }
        if let Some(f) = args.prior_v {
            e.priors_v = PriorAssignment::broadcast(f).with_fixed(e.priors_v.fixed);
        }
        if args.shared_hyperparams {
            e.shared_hyperparams = true;
        }
        if let Some((m_r, n_r)) = args.projections {
            e.lowrank = Some(LowRankConfig::new(m_r, n_r));
        }
        if let Some(v) = args.em_iters {
            e.max_em_iters = v;
        }
        if let Some(v) = args.bcd_iters {
            e.max_bcd_iters = v;
        }
        if let Some(v) = args.tol {
            e.tol = v;
        }
        if let Some(v) = args.seed {
            e.seed = v;
        }
        if let Some(v) = args.runs {
            self.runs = v;
        }
    }
}

#[derive(Debug, Serialize)]
struct Hyperparams<'a> {
    alpha: f64,
    u: &'a [PriorSpec],
    v: &'a [PriorSpec],
}

#[derive(Debug, Serialize)]
struct Explained {
    source: usize,
    variance_explained: f64,
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    config: &'a RunConfig,
    rows: usize,
    cols: usize,
    final_neg_log_joint: f64,
    alpha: f64,
    em_iterations: usize,
    bcd_iterations: usize,
    em_converged: bool,
    bcd_converged: bool,
    flops_per_iteration: f64,
    total_flops: f64,
    /// Sorted by decreasing variance explained.
    variance_explained: Vec<Explained>,
    events: &'a [EngineEvent],
}

#[derive(Debug, Serialize)]
struct Timing {
    wall_time_secs: f64,
}

fn run_dir(out: &Path, runs: usize, i: usize) -> PathBuf {
    if runs == 1 {
        out.to_path_buf()
    } else {
        out.join(format!("run_{i:03}"))
    }
}

fn run_one(x: &DataMatrix, config: &RunConfig, dir: &Path) -> anyhow::Result<()> {
    let cfg = &config.engine;
    let (state, report) = fit(x, cfg).with_context(|| format!("fit with seed {} failed", cfg.seed))?;
    for e in &report.events {
        warn!("seed {}: {}", cfg.seed, serde_json::to_string(e)?);
    }
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let write_bank = |name: &str, bank: &decompose::FactorBank| {
        let cols = bank.columns();
        let values: Vec<f64> = cols.iter().copied().collect();
        write_matrix(&dir.join(name), cols.nrows(), cols.ncols(), &values)
    };
    write_bank("U.csv", &state.u)?;
    write_bank("V.csv", &state.v)?;
    write_json(
        &dir.join("hyperparams.json"),
        &Hyperparams {
            alpha: state.alpha,
            u: state.u.priors(),
            v: state.v.priors(),
        },
    )?;
    report.write_jsonl(BufWriter::new(File::create(dir.join("report.jsonl"))?))?;

    let mut explained: Vec<Explained> = state
        .sources(x)
        .into_iter()
        .map(|s| Explained {
            source: s.index,
            variance_explained: s.variance_explained,
        })
        .collect();
    explained.sort_by(|a, b| b.variance_explained.total_cmp(&a.variance_explained));
    let summary = Summary {
        config,
        rows: x.rows(),
        cols: x.cols(),
        final_neg_log_joint: report.final_neg_log_joint,
        alpha: state.alpha,
        em_iterations: report.em_iterations,
        bcd_iterations: report.bcd_iterations,
        em_converged: report.em_converged,
        bcd_converged: report.bcd_converged,
        flops_per_iteration: report.records.first().map_or(0.0, |r| r.flop_count),
        total_flops: report.total_flops,
        variance_explained: explained,
        events: &report.events,
    };
    write_json(&dir.join("summary.json"), &summary)?;
    write_json(
        &dir.join("timing.json"),
        &Timing {
            wall_time_secs: report.wall_time_secs,
        },
    )?;
    info!(
        "seed {}: neg log joint {:.6e} after {} EM and {} BCD iterations",
        cfg.seed, report.final_neg_log_joint, report.em_iterations, report.bcd_iterations
    );
    Ok(())
}

fn thread_count() -> anyhow::Result<usize> {
    match std::env::var(THREADS_VAR) {
        Err(_) => Ok(1),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(anyhow!("{THREADS_VAR} must be a positive integer, got '{s}'")),
        },
    }
}

pub fn cmd_run(args: RunArgs) -> Result<(), Failure> {
    let mut config: RunConfig = match &args.config {
        Some(p) => read_json(p).usage()?,
        None => RunConfig::default(),
    };
    config.apply(&args);
    let input = config
        .input
        .clone()
        .ok_or_else(|| anyhow!("no input matrix: pass --input or set \"input\" in the config"))
        .usage()?;
    let out = config
        .out
        .clone()
        .ok_or_else(|| anyhow!("no output directory: pass --out or set \"out\" in the config"))
        .usage()?;
    if config.runs == 0 {
        return Err(anyhow!("runs must be at least 1")).usage();
    }
    let threads = thread_count().usage()?;
    let x = io::read_data(&input).usage()?;
    config.engine.validate(x.rows(), x.cols()).usage()?;

    let runs = config.runs;
    let base_seed = config.engine.seed;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| anyhow!("cannot start thread pool: {e}"))?;
    let results: Vec<anyhow::Result<()>> = pool.install(|| {
        (0..runs)
            .into_par_iter()
            .map(|i| {
                let mut own = config.clone();
                own.out = None;
                own.engine.seed = base_seed.wrapping_add(i as u64);
                run_one(&x, &own, &run_dir(&out, runs, i))
            })
            .collect()
    });
    for r in results {
        r?;
    }
    println!("wrote {runs} run(s) to {}", out.display());
    Ok(())
}
