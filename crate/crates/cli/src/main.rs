mod flops;
mod io;
mod run;
mod score;
mod synth;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use decompose::datagen::CorrelationTarget;
use decompose::PriorFamily;

/// Exit status 2: the invocation or its inputs are wrong.
const EXIT_USAGE: u8 = 2;
/// Exit status 1: a valid invocation failed while running.
const EXIT_RUNTIME: u8 = 1;

/// Error tagged with the exit status it maps to.
#[derive(Debug)]
pub enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

pub trait UsageContext<T> {
    /// Marks an error as a usage/config error.
    fn usage(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> UsageContext<T> for Result<T, E> {
    fn usage(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Usage(e.into()))
    }
}

#[derive(Parser, Debug)]
#[command(name = "decompose", version, about = "Probabilistic blind source separation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic data set and its ground truth.
    Synth(SynthArgs),
    /// Factorise a data matrix.
    Run(RunArgs),
    /// Score run directories against a ground-truth manifest.
    Score(ScoreArgs),
    /// Compare full and reduced FLOP estimates over a grid.
    Flops(FlopsArgs),
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// JSON synthetic configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Data matrix (.csv or .bin).
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Number of sources.
    #[arg(long)]
    pub k: Option<usize>,
    /// Prior family for every column of U.
    #[arg(long, value_name = "NAME", value_parser = parse_family)]
    pub prior_u: Option<PriorFamily>,
    /// Prior family for every column of V.
    #[arg(long, value_name = "NAME", value_parser = parse_family)]
    pub prior_v: Option<PriorFamily>,
    /// Fit one hyperparameter set per factor instead of one per column.
    #[arg(long)]
    pub shared_hyperparams: bool,
    /// Random projection ranks.
    #[arg(long, value_name = "M_R[,N_R]", value_parser = parse_projections)]
    pub projections: Option<(usize, Option<usize>)>,
    #[arg(long)]
    pub em_iters: Option<usize>,
    #[arg(long)]
    pub bcd_iters: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Repeat the fit with seeds seed, seed+1, ...
    #[arg(long)]
    pub runs: Option<usize>,
}

#[derive(Args, Debug)]
pub struct ScoreArgs {
    /// Ground-truth manifest, or the directory holding it.
    #[arg(long)]
    pub truth: PathBuf,
    /// Run directories, or parents of run_* directories.
    #[arg(required = true)]
    pub runs: Vec<PathBuf>,
    /// What the correlation compares.
    #[arg(long, value_enum, default_value_t = Target::Full)]
    pub target: Target,
    /// Directory for score.json and correlations.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
pub enum Target {
    Full,
    Spatial,
    Temporal,
}

impl From<Target> for CorrelationTarget {
    fn from(t: Target) -> Self {
        match t {
            Target::Full => CorrelationTarget::Full,
            Target::Spatial => CorrelationTarget::Spatial,
            Target::Temporal => CorrelationTarget::Temporal,
        }
    }
}

#[derive(Args, Debug)]
pub struct FlopsArgs {
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub n: usize,
    /// Source counts.
    #[arg(long, value_delimiter = ',', required = true)]
    pub k: Vec<usize>,
    /// Row-axis projection ranks.
    #[arg(long = "m-r", value_delimiter = ',', required = true)]
    pub m_r: Vec<usize>,
    /// Column-axis projection rank; unreduced when omitted.
    #[arg(long = "n-r")]
    pub n_r: Option<usize>,
    /// CSV export path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_family(s: &str) -> Result<PriorFamily, String> {
    s.parse::<PriorFamily>().map_err(|_| {
        let names: Vec<&str> = PriorFamily::ALL.iter().map(|f| f.name()).collect();
        format!("unknown prior family '{s}' (expected one of {})", names.join(", "))
    })
}

fn parse_projections(s: &str) -> Result<(usize, Option<usize>), String> {
    let parse = |t: &str| t.trim().parse::<usize>().map_err(|_| format!("invalid rank '{t}'"));
    match s.split_once(',') {
        None => Ok((parse(s)?, None)),
        Some((m, n)) => Ok((parse(m)?, Some(parse(n)?))),
    }
}

fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.chain()
        .filter_map(|c| c.downcast_ref::<std::io::Error>())
        .any(|io| io.kind() == std::io::ErrorKind::BrokenPipe)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(a) => synth::cmd_synth(a),
        Command::Run(a) => run::cmd_run(a),
        Command::Score(a) => score::cmd_score(a),
        Command::Flops(a) => flops::cmd_flops(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        // A closed downstream pipe (`| head`) is not an error.
        Err(Failure::Runtime(e)) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
