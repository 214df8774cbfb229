mod commands;
mod config;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use ampcs_core::io::Metadata;
use ampcs_core::Case;
use clap::parser::ValueSource;
use clap::{CommandFactory, FromArgMatches, Parser, Subcommand};
use serde::Serialize;

use crate::commands::Ctx;
use crate::config::{
    PhaseArgs, QqMaiArgs, RunConfig, SeCurveArgs, SePredictArgs, SolveArgs, TimingArgs, TuneArgs, UniversalityArgs,
};

const GLOBAL_FLAGS: [&str; 6] = ["seed", "workers", "out", "case", "config", "dump_config"];

/// Approximate message passing experiments for sparse recovery.
#[derive(Parser)]
#[command(name = "ampcs", version)]
struct Cli {
    /// Master seed; every random stream derives from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output file, or directory for commands writing several files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Signal class: plus, pm or box.
    #[arg(long, global = true)]
    case: Option<Case>,
    /// TOML run file. Its section for the command replaces the command flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Print the resolved run file instead of running.
    #[arg(long, global = true)]
    dump_config: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Predicted phase boundary rho_SE(delta).
    SeCurve(SeCurveArgs),
    /// Monte-Carlo phase diagram with logistic transition estimates.
    Phase(PhaseArgs),
    /// Solve one random instance and write its iteration trace.
    Solve(SolveArgs),
    /// Compare averaged solver observables with their predicted evolution.
    SePredict(SePredictArgs),
    /// Iterations and time to reach MSE targets across problem sizes.
    Timing(TimingArgs),
    /// Normality of the interference vector across iterations.
    QqMai(QqMaiArgs),
    /// Phase transitions across matrix ensembles and coefficient laws.
    Universality(UniversalityArgs),
    /// Pick the threshold control with the highest fitted transition.
    Tune(TuneArgs),
}

/// A failed run, printed as one `error[kind]: message` line.
#[derive(Debug)]
pub struct Failure {
    kind: &'static str,
    message: String,
}

impl Failure {
    fn new(kind: &'static str, message: String) -> Self {
        Failure { kind, message }
    }

    pub fn invalid(message: String) -> Self {
        Failure::new("invalid-parameter", message)
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Failure::new("io", format!("{}: {e}", path.display()))
    }
}

impl From<ampcs_core::Error> for Failure {
    fn from(e: ampcs_core::Error) -> Self {
        Failure::new(e.kind(), e.to_string())
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error[{}]: {}", self.kind, self.message.replace('\n', " "))
    }
}

/// Flatten a parameter record into `key: value` metadata, nested tables
/// joined with dots.
fn stamp(meta: Metadata, section: &impl Serialize) -> Metadata {
    fn walk(meta: Metadata, prefix: &str, v: &toml::Value) -> Metadata {
        match v {
            toml::Value::Table(t) => t.iter().fold(meta, |m, (k, v)| {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                walk(m, &key, v)
            }),
            toml::Value::String(s) => meta.with(prefix, s),
            other => meta.with(prefix, other),
        }
    }
    match toml::Value::try_from(section) {
        Ok(v) => walk(meta, "", &v),
        Err(_) => meta,
    }
}

fn load_config(path: &Path) -> Result<RunConfig, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
    RunConfig::from_toml(&text).map_err(|e| Failure::new("config", format!("{}: {e}", path.display())))
}

/// Replace the parsed command by the matching section of the run file.
/// Mixing the two would silently drop one side, so it is refused.
fn from_file(command: Command, file: &RunConfig, matches: &clap::ArgMatches, path: &Path) -> Result<Command, Failure> {
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let cmd = Cli::command();
    let explicit: Vec<String> = cmd
        .find_subcommand(name)
        .expect("parsed subcommand exists")
        .get_arguments()
        .filter_map(|a| a.get_long().map(|long| (a.get_id().as_str(), long)))
        .filter(|(id, _)| !GLOBAL_FLAGS.contains(id))
        .filter(|(id, _)| sub.value_source(id) == Some(ValueSource::CommandLine))
        .map(|(_, long)| format!("--{long}"))
        .collect();
    if !explicit.is_empty() {
        return Err(Failure::new("usage", format!("{} cannot be combined with --config", explicit.join(", "))));
    }
    let missing = |name: &str| Failure::new("config", format!("{}: no [{name}] section", path.display()));
    Ok(match command {
        Command::SeCurve(_) => Command::SeCurve(file.se_curve.clone().ok_or_else(|| missing("se-curve"))?),
        Command::Phase(_) => Command::Phase(file.phase.clone().ok_or_else(|| missing("phase"))?),
        Command::Solve(_) => Command::Solve(file.solve.clone().ok_or_else(|| missing("solve"))?),
        Command::SePredict(_) => Command::SePredict(file.se_predict.clone().ok_or_else(|| missing("se-predict"))?),
        Command::Timing(_) => Command::Timing(file.timing.clone().ok_or_else(|| missing("timing"))?),
        Command::QqMai(_) => Command::QqMai(file.qq_mai.clone().ok_or_else(|| missing("qq-mai"))?),
        Command::Universality(_) => {
            Command::Universality(file.universality.clone().ok_or_else(|| missing("universality"))?)
        }
        Command::Tune(_) => Command::Tune(file.tune.clone().ok_or_else(|| missing("tune"))?),
    })
}

fn run() -> Result<(), Failure> {
    let matches = match Cli::command().try_get_matches() {
        Ok(m) => m,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return Ok(());
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or_default().trim_start_matches("error: ");
            return Err(Failure::new("usage", first.to_string()));
        }
    };
    let cli = Cli::from_arg_matches(&matches).map_err(|e| Failure::new("usage", e.to_string()))?;

    let mut run = RunConfig::new(0, Case::Signed);
    let mut command = cli.command;
    if let Some(path) = &cli.config {
        let file = load_config(path)?;
        command = from_file(command, &file, &matches, path)?;
        run.seed = file.seed;
        run.case = file.case;
    }
    if let Some(seed) = cli.seed {
        run.seed = seed;
    }
    if let Some(case) = cli.case {
        run.case = case;
    }
    match &command {
        Command::SeCurve(a) => run.se_curve = Some(a.clone()),
        Command::Phase(a) => run.phase = Some(a.clone()),
        Command::Solve(a) => run.solve = Some(a.clone()),
        Command::SePredict(a) => run.se_predict = Some(a.clone()),
        Command::Timing(a) => run.timing = Some(a.clone()),
        Command::QqMai(a) => run.qq_mai = Some(a.clone()),
        Command::Universality(a) => run.universality = Some(a.clone()),
        Command::Tune(a) => run.tune = Some(a.clone()),
    }
    if cli.dump_config {
        print!("{}", run.to_toml());
        return Ok(());
    }

    if let Some(workers) = cli.workers {
        if workers == 0 {
            return Err(Failure::invalid("--workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .map_err(|e| Failure::new("resource-limit", e.to_string()))?;
    }

    let base = Metadata::new(run.seed).with("case", run.case);
    let meta = match &command {
        Command::SeCurve(a) => stamp(base.with("command", "se-curve"), a),
        Command::Phase(a) => stamp(base.with("command", "phase"), a),
        Command::Solve(a) => stamp(base.with("command", "solve"), a),
        Command::SePredict(a) => stamp(base.with("command", "se-predict"), a),
        Command::Timing(a) => stamp(base.with("command", "timing"), a),
        Command::QqMai(a) => stamp(base.with("command", "qq-mai"), a),
        Command::Universality(a) => stamp(base.with("command", "universality"), a),
        Command::Tune(a) => stamp(base.with("command", "tune"), a),
    };
    let ctx = Ctx { seed: run.seed, case: run.case, out: cli.out, meta };
    match &command {
        Command::SeCurve(a) => commands::se_curve(&ctx, a),
        Command::Phase(a) => commands::phase(&ctx, a),
        Command::Solve(a) => commands::solve_one(&ctx, a),
        Command::SePredict(a) => commands::se_predict(&ctx, a),
        Command::Timing(a) => commands::timing(&ctx, a),
        Command::QqMai(a) => commands::qq_mai(&ctx, a),
        Command::Universality(a) => commands::universality(&ctx, a),
        Command::Tune(a) => commands::tune(&ctx, a),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{f}");
            ExitCode::from(if f.kind == "usage" { 2 } else { 1 })
        }
    }
}
