//! `pilotwave`: runs one scenario per invocation and writes its artifacts to an output directory.

mod commands;
mod config;
mod output;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Outcome, Run};
use config::Config;
use output::OutputDir;

#[derive(Debug, Parser)]
#[command(name = "pilotwave", version, about = "Pilot-wave scenarios: evolution, trajectories, gauges, hidden-Markov builds")]
struct Cli {
    /// TOML configuration; built-in defaults when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed of the scenario being run.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory [default: pilotwave-out/<command>].
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; all cores when absent.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Subcommand)]
enum Command {
    /// Evolve the configured wave function and store a snapshot series.
    Evolve,
    /// Evolve, guide a Born-distributed ensemble and report equivariance.
    Trajectories,
    /// Record single landing sites behind two slits and histogram them.
    DoubleSlit {
        #[arg(long)]
        runs: Option<usize>,
    },
    /// Compare guidance with and without a configuration-space gauge.
    GaugeCompare,
    /// Build a hidden-Markov model from a density and certify equivariance.
    HmmBuild,
    /// Search the Shoemaker universe for a non-Markov witness.
    Shoemaker {
        #[arg(long)]
        years: Option<u64>,
    },
    /// Audit the real phase-space form of finite quantum systems.
    PhaseSpace,
    /// Run the acceptance suite.
    Selftest,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Evolve => "evolve",
            Command::Trajectories => "trajectories",
            Command::DoubleSlit { .. } => "double-slit",
            Command::GaugeCompare => "gauge-compare",
            Command::HmmBuild => "hmm-build",
            Command::Shoemaker { .. } => "shoemaker",
            Command::PhaseSpace => "phase-space",
            Command::Selftest => "selftest",
        }
    }
}

#[derive(Debug)]
pub enum Failure {
    Config(String),
    Numeric(String),
    Certification(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Numeric(_) => 2,
            Failure::Certification(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "configuration: {m}"),
            Failure::Numeric(m) => write!(f, "{m}"),
            Failure::Certification(m) => write!(f, "certification: {m}"),
        }
    }
}

impl From<pilotwave::Error> for Failure {
    fn from(e: pilotwave::Error) -> Self {
        use pilotwave::Error as E;
        match e {
            E::InvalidGrid(_)
            | E::GridTooLarge { .. }
            | E::AxisOutOfRange { .. }
            | E::ComponentCount { .. }
            | E::UnsupportedSolver(_)
            | E::InvalidArgument(_)
            | E::CoefficientSum(_)
            | E::MultivaluedGauge(_) => Failure::Config(e.to_string()),
            _ => Failure::Numeric(e.to_string()),
        }
    }
}

fn load_config(path: Option<&PathBuf>) -> Result<Config, Failure> {
    let Some(path) = path else {
        return Ok(Config::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    Config::parse(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    if let Some(k) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(k).build_global().map_err(|e| Failure::Config(format!("--threads {k}: {e}")))?;
    }
    let mut config = load_config(cli.config.as_ref())?;
    let seed = cli.seed.or(config.seed).unwrap_or(1);
    config.seed = Some(seed);
    if let Some(s) = cli.seed {
        config.double_slit.seed = s;
        config.phase_space.seed = s;
    }
    match cli.command {
        Command::DoubleSlit { runs: Some(n) } => config.double_slit.runs = n,
        Command::Shoemaker { years: Some(y) } => config.shoemaker.years = y,
        _ => {}
    }
    let text = config.to_toml();
    let hash = pilotwave::io::content_hash(text.as_bytes());
    let name = cli.command.name();
    let root = cli.out.clone().unwrap_or_else(|| PathBuf::from("pilotwave-out").join(name));
    let mut out = OutputDir::lock(&root)?;
    out.write("config.toml", &text)?;
    let mut header = vec![
        ("command", name.to_string()),
        ("version", env!("CARGO_PKG_VERSION").to_string()),
        ("config_hash", hash.clone()),
        ("seed", seed.to_string()),
        ("threads", rayon::current_num_threads().to_string()),
        ("rerun", format!("pilotwave {name} --config config.toml --out <dir>")),
    ];
    if let Some(p) = &cli.config {
        header.push(("source_config", p.display().to_string()));
    }
    log::info!("{name}: writing to {} (config {hash})", out.root().display());

    let mut run = Run { config, hash, seed, out };
    let result = match cli.command {
        Command::Evolve => commands::evolve_cmd(&mut run),
        Command::Trajectories => commands::trajectories(&mut run),
        Command::DoubleSlit { .. } => commands::double_slit(&mut run),
        Command::GaugeCompare => commands::gauge_compare(&mut run),
        Command::HmmBuild => commands::hmm_build(&mut run),
        Command::Shoemaker { .. } => commands::shoemaker(&mut run),
        Command::PhaseSpace => commands::phase_space(&mut run),
        Command::Selftest => commands::selftest(&mut run),
    };
    let outcome = match &result {
        Ok(Outcome::Ok) => "ok".to_string(),
        Ok(Outcome::Uncertified(m)) => format!("uncertified: {m}"),
        Err(f) => format!("failed: {f}"),
    };
    run.out.finish(&header, &outcome)?;
    match result? {
        Outcome::Ok => Ok(()),
        Outcome::Uncertified(m) => Err(Failure::Certification(m)),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = if cli.verbose { "debug" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}
