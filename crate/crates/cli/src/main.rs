//! `cavent`: runs scenario files and the built-in protocols, writing CSV
//! and text outputs.
//!
//! Exit status: 0 on success, 1 on configuration or I/O errors, 2 when the
//! requested protocol is infeasible, 3 when an asserted validation check
//! fails.

use std::path::PathBuf;
use std::process::ExitCode;

use cavent::scenario::{is_infeasible, run_scenario, ProtocolConfig, ProtocolKind, ScenarioConfig};
use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "cavent", version, about = "Multiatom entanglement in a single-mode cavity")]
struct Cli {
    /// Scenario file (TOML). Without it the subcommand runs its built-in example.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides the scenario's `output.dir`.
    #[arg(long, global = true, env = "CAVENT_OUT_DIR")]
    out_dir: Option<PathBuf>,
    /// Seed for randomized components; overrides the scenario's `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for parallel sweeps (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Print the effective scenario as TOML and exit.
    #[arg(long, global = true)]
    dump_config: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Run whatever the scenario file describes (pipeline and/or protocol).
    Run,
    /// Dicke success-probability sweep over |c|.
    DickeSweep,
    /// GHZ state through the Kerr projection.
    Ghz,
    /// Entangling two ensembles by squeezing and vacuum detection.
    TwoEnsemble,
    /// Laser amplitudes reproducing targeted coupling coefficients.
    ScheduleSolve,
    /// Oracle comparisons and printed-formula discrepancies.
    Validate,
    /// Canonic form and tanglemeter of an atomic state.
    Canonicalize,
}

impl Command {
    fn kind(self) -> Option<ProtocolKind> {
        Some(match self {
            Command::Run => return None,
            Command::DickeSweep => ProtocolKind::DickeSweep,
            Command::Ghz => ProtocolKind::Ghz,
            Command::TwoEnsemble => ProtocolKind::TwoEnsemble,
            Command::ScheduleSolve => ProtocolKind::ScheduleSolve,
            Command::Validate => ProtocolKind::Validate,
            Command::Canonicalize => ProtocolKind::Canonicalize,
        })
    }
}

fn effective_config(cli: &Cli) -> Result<ScenarioConfig, String> {
    let mut config = match (&cli.config, cli.command.kind()) {
        (Some(path), kind) => {
            let c = ScenarioConfig::load(path).map_err(|e| e.to_string())?;
            if let Some(kind) = kind {
                match &c.protocol {
                    Some(p) if p.kind() == kind => {}
                    Some(p) => return Err(format!("scenario protocol is {:?}, not {kind:?}", p.kind())),
                    None => return Err(format!("scenario has no [protocol] section for {kind:?}")),
                }
            }
            c
        }
        (None, Some(kind)) => ScenarioConfig::for_protocol(ProtocolConfig::example(kind)),
        (None, None) => return Err("`run` needs --config".into()),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(dir) = &cli.out_dir {
        config.output.dir = dir.clone();
    }
    config.validate().map_err(|e| e.to_string())?;
    Ok(config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    let config = match effective_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if cli.dump_config {
        print!("{}", config.to_toml());
        return ExitCode::SUCCESS;
    }
    let report = match run_scenario(&config) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(if is_infeasible(&e) { 2 } else { 1 });
        }
    };
    match report.write_to(&config.output.dir, &config.output.prefix) {
        Ok(paths) => {
            for p in paths {
                println!("wrote {}", p.display());
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    for line in &report.summary {
        println!("{line}");
    }
    let failed = report.failed_checks();
    for c in &failed {
        eprintln!("check failed: {} = {:e} > {:e}", c.name, c.value, c.tolerance.unwrap_or(f64::NAN));
    }
    if !failed.is_empty() && config.validation.fail_on_breach {
        return ExitCode::from(3);
    }
    ExitCode::SUCCESS
}
