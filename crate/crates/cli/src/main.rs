//! `mfqkd`: key rates, sweeps, parameter optimization and self-validation.
//!
//! Exit status: 0 on success, 1 on a failed validation or unexpected error,
//! 2 when an estimation program is infeasible, 3 for an invalid configuration.

use clap::{Args, Parser, Subcommand, ValueEnum};
use mfqkd::keyrate::{keyrate, optimize_parameters, sweep, Analysis, KeyRateReport, ProtocolConfig, RateStatus, Transmitter};
use mfqkd::report::{render, OutputFormat};
use mfqkd::validation::{run_check, CheckOutcome, ValidationSettings, CHECK_NAMES};
use mfqkd::Error;
use std::path::PathBuf;
use std::process::ExitCode;

const EXIT_FAILURE: u8 = 1;
const EXIT_INFEASIBLE: u8 = 2;
const EXIT_CONFIG: u8 = 3;

#[derive(Parser)]
#[command(name = "mfqkd", version, about = "Asymptotic key rates for passive and OIL transmitters")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Key rate at a single distance and attenuation.
    Rate(GridArgs),
    /// Key rates over the distance x attenuation grid.
    Sweep(GridArgs),
    /// Optimized source parameters at every grid point.
    Optimize(GridArgs),
    /// Run the built-in validation checks.
    Validate(ValidateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum TransmitterArg {
    Passive,
    Oil,
}

#[derive(Clone, Copy, ValueEnum)]
enum AnalysisArg {
    Baseline,
    Refined,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Level {
    Quick,
    Full,
}

#[derive(Args)]
struct GridArgs {
    /// JSON configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    transmitter: Option<TransmitterArg>,
    /// Fiber length(s) in km, comma separated.
    #[arg(long, value_delimiter = ',')]
    distance_km: Vec<f64>,
    /// Intensity-modulator attenuation(s) in dB, comma separated.
    #[arg(long, value_delimiter = ',')]
    att_db: Vec<f64>,
    #[arg(long, value_enum)]
    analysis: Option<AnalysisArg>,
    /// Largest photon number kept in the estimation programs.
    #[arg(long)]
    ncut: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    quadrature_nodes: Option<usize>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long, value_enum, default_value = "quick")]
    level: Level,
    /// Run only these checks (1 to 10); all when absent.
    #[arg(long, value_delimiter = ',')]
    check: Vec<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    quadrature_nodes: Option<usize>,
}

fn load_config(a: &GridArgs) -> Result<ProtocolConfig, Error> {
    let mut cfg = match &a.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            ProtocolConfig::from_json(&text)?
        }
        None => ProtocolConfig::default(),
    };
    if let Some(t) = a.transmitter {
        cfg.transmitter = match t {
            TransmitterArg::Passive => Transmitter::Passive,
            TransmitterArg::Oil => Transmitter::Oil,
        };
    }
    if let Some(an) = a.analysis {
        cfg.analysis = match an {
            AnalysisArg::Baseline => Analysis::Baseline,
            AnalysisArg::Refined => Analysis::Refined,
        };
    }
    if !a.distance_km.is_empty() {
        cfg.distances_km = a.distance_km.clone();
    }
    if !a.att_db.is_empty() {
        cfg.attenuations_db = a.att_db.clone();
    }
    if let Some(n) = a.ncut {
        cfg.passive.n_cut = n;
        cfg.oil.n_cut = n;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(n) = a.quadrature_nodes {
        cfg.quadrature.nodes = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn evaluate(command: &Command, a: &GridArgs) -> Result<Vec<KeyRateReport>, Error> {
    let mut cfg = load_config(a)?;
    match command {
        Command::Rate(_) => {
            if cfg.distances_km.len() != 1 || cfg.attenuations_db.len() != 1 {
                return Err(Error::Config("rate takes exactly one distance and one attenuation".into()));
            }
            let (d, att) = (cfg.distances_km[0], cfg.attenuations_db[0]);
            if cfg.optimize {
                Ok(vec![optimize_parameters(&cfg, d, att)?.report])
            } else {
                Ok(vec![keyrate(&cfg, d, att)?])
            }
        }
        Command::Optimize(_) => {
            cfg.optimize = true;
            sweep(&cfg)
        }
        _ => sweep(&cfg),
    }
}

fn emit(reports: &[KeyRateReport], a: &GridArgs) -> Result<(), String> {
    let format = match a.format {
        FormatArg::Csv => OutputFormat::Csv,
        FormatArg::Json => OutputFormat::Json,
    };
    let text = render(reports, format).map_err(|e| e.to_string())?;
    match &a.out {
        Some(path) => std::fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn exit_for(e: &Error) -> u8 {
    match e {
        Error::LpFailed { .. } => EXIT_INFEASIBLE,
        Error::Config(_) => EXIT_CONFIG,
        _ => EXIT_FAILURE,
    }
}

fn run_grid(command: &Command, a: &GridArgs) -> ExitCode {
    let reports = match evaluate(command, a) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_for(&e));
        }
    };
    if let Err(msg) = emit(&reports, a) {
        eprintln!("error: {msg}");
        return ExitCode::from(EXIT_FAILURE);
    }
    let infeasible = reports.iter().filter(|r| matches!(r.status, RateStatus::LpFailed(_))).count();
    let failed = reports.iter().filter(|r| matches!(r.status, RateStatus::Failed(_))).count();
    if infeasible > 0 {
        eprintln!("error: {infeasible} grid point(s) had an infeasible estimation program");
        ExitCode::from(EXIT_INFEASIBLE)
    } else if failed > 0 {
        eprintln!("error: {failed} grid point(s) failed");
        ExitCode::from(EXIT_FAILURE)
    } else {
        ExitCode::SUCCESS
    }
}

fn run_validate(a: &ValidateArgs) -> ExitCode {
    let mut s = match a.level {
        Level::Quick => ValidationSettings::quick(),
        Level::Full => ValidationSettings::full(),
    };
    if let Some(seed) = a.seed {
        s.seed = seed;
    }
    if let Some(n) = a.quadrature_nodes {
        s.quadrature_nodes = n;
    }
    let ids: Vec<usize> = if a.check.is_empty() { (1..=CHECK_NAMES.len()).collect() } else { a.check.clone() };
    if let Some(bad) = ids.iter().find(|&&id| id == 0 || id > CHECK_NAMES.len()) {
        eprintln!("error: no check numbered {bad}");
        return ExitCode::from(EXIT_CONFIG);
    }
    let outcomes: Vec<CheckOutcome> = ids
        .iter()
        .map(|&id| {
            let o = run_check(id, &s);
            println!("{o}");
            o
        })
        .collect();
    let passed = outcomes.iter().filter(|o| o.passed).count();
    println!("{passed}/{} checks passed", outcomes.len());
    if passed == outcomes.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAILURE)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match &cli.command {
        Command::Validate(a) => run_validate(a),
        c @ (Command::Rate(a) | Command::Sweep(a) | Command::Optimize(a)) => run_grid(c, a),
    }
}
