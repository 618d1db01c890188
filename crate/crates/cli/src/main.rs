//! Command-line front end: parse a TOML config, run the requested
//! experiment, write report.json and CSV tables, and exit with
//! 0 (all checks pass), 1 (a check failed), 2 (config error) or
//! 3 (numerical error).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use convolab::config::{ExperimentConfig, ExperimentKind};
use convolab::experiment::run_experiment;
use convolab::Error;

/// Environment variable naming the default output directory.
const OUT_ENV: &str = "CONVOLAB_OUT";

#[derive(Parser)]
#[command(
    name = "convolab",
    about = "Numerical laboratory for vector-valued stochastic convolutions",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML experiment configuration; defaults apply when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (default: $CONVOLAB_OUT or ./convolab-out)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the seed from the config
    #[arg(long)]
    seed: Option<u64>,
    /// Worker thread count (default: all cores)
    #[arg(long)]
    threads: Option<usize>,
    /// Only judge checks whose name contains this string
    #[arg(long)]
    check: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a stochastic-convolution ensemble and export it
    Convolve(Common),
    /// Estimate worst-node moment-ratio constants over an integrand family
    Bdg(Common),
    /// Tail probabilities, subgaussian fit, and the exponential bound
    Tail(Common),
    /// Space-transfer and interpolation checks for the ratio constants
    Interp(Common),
    /// Martingale sup/terminal moment ratio against the conjugate exponent
    Doob(Common),
    /// Poisson-kernel dilation identity and route-agreement checks
    DilationCheck(Common),
    /// Contraction renorming: Lyapunov residual and contractivity
    RenormCheck(Common),
    /// Smoothness constants of the norm-power functional
    CrProbe(Common),
    /// The full acceptance battery
    Suite(Common),
}

impl Command {
    fn kind(&self) -> ExperimentKind {
        match self {
            Command::Convolve(_) => ExperimentKind::Convolve,
            Command::Bdg(_) => ExperimentKind::Bdg,
            Command::Tail(_) => ExperimentKind::Tail,
            Command::Interp(_) => ExperimentKind::Interp,
            Command::Doob(_) => ExperimentKind::Doob,
            Command::DilationCheck(_) => ExperimentKind::DilationCheck,
            Command::RenormCheck(_) => ExperimentKind::RenormCheck,
            Command::CrProbe(_) => ExperimentKind::CrProbe,
            Command::Suite(_) => ExperimentKind::Suite,
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Convolve(c)
            | Command::Bdg(c)
            | Command::Tail(c)
            | Command::Interp(c)
            | Command::Doob(c)
            | Command::DilationCheck(c)
            | Command::RenormCheck(c)
            | Command::CrProbe(c)
            | Command::Suite(c) => c,
        }
    }
}

fn load_config(kind: ExperimentKind, common: &Common) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                Error::Config(format!("cannot read config {}: {e}", path.display()))
            })?;
            ExperimentConfig::from_toml(&text)?
        }
        None => ExperimentConfig::from_toml("[experiment]\nkind = \"suite\"\n")?,
    };
    cfg.experiment.kind = kind;
    if let Some(seed) = common.seed {
        cfg.sampling.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(common: &Common) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("convolab-out"))
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::InvalidInput(_) => 2,
        _ => 3,
    }
}

fn run() -> Result<bool, Error> {
    let cli = Cli::parse();
    let common = cli.command.common();
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot configure {n} threads: {e}")))?;
    }
    let cfg = load_config(cli.command.kind(), common)?;
    let dir = out_dir(common);
    let out = run_experiment(&cfg, &dir)?;

    let judged: Vec<_> = out
        .report
        .checks
        .iter()
        .filter(|c| {
            common
                .check
                .as_ref()
                .map(|f| c.name.contains(f.as_str()))
                .unwrap_or(true)
        })
        .collect();
    for c in &judged {
        println!("{} {} = {:.6e} ({})", c.verdict, c.name, c.statistic.value, c.threshold);
    }
    println!("report: {}", dir.join("report.json").display());
    Ok(judged
        .iter()
        .all(|c| c.verdict == convolab::report::Verdict::Pass))
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
