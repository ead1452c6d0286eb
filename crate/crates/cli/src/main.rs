//! Scenario runner: reads a JSON config, runs one figure scenario and writes
//! `<scenario>.csv`, `<scenario>.json` and `<scenario>.meta.json`.
//!
//! Exit status: 0 on success, 1 on runtime errors, 2 on config errors, 3 when
//! a fit did not converge (outputs are still written).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use entangle_sense::scenario::config::render;
use entangle_sense::scenario::locate::LineIndex;
use entangle_sense::scenario::{run_scenario, write_outputs, Diagnostic, ScenarioConfig, ScenarioId};

const EXIT_RUNTIME: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NOT_CONVERGED: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "entangle-sense", version, about = "Run entanglement-enhanced sensing scenarios")]
#[command(args_conflicts_with_subcommands = true)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    /// Scenario id (fig1f, fig2a, ..., fig4c); overrides the config file.
    #[arg(long)]
    scenario: Option<ScenarioId>,
    /// JSON config; built-in defaults when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, env = "ENTANGLE_SENSE_OUT", default_value = "out")]
    out: PathBuf,
    /// RNG seed; overrides the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo trajectories; overrides the config file.
    #[arg(long)]
    trajectories: Option<usize>,
    /// Print nothing on success.
    #[arg(long)]
    quiet: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// List every violated invariant of a config file.
    Validate { path: PathBuf },
}

enum Failure {
    Config(String),
    Runtime(String),
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn config_failure(path: Option<&Path>, diags: &[Diagnostic]) -> Failure {
    let head = path.map(|p| format!("{}:\n", p.display())).unwrap_or_default();
    Failure::Config(format!("{head}{}", render(diags)))
}

fn load(cli: &Cli) -> Result<(ScenarioId, ScenarioConfig), Failure> {
    let (mut config, index) = match &cli.config {
        Some(path) => {
            let text = read(path)?;
            let config = ScenarioConfig::from_json(&text).map_err(|d| config_failure(Some(path), &d))?;
            (config, Some(LineIndex::build(&text)))
        }
        None => (ScenarioConfig::default(), None),
    };
    if let Some(id) = cli.scenario {
        config.scenario = Some(id);
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(n) = cli.trajectories {
        config.noise.trajectories = n;
    }
    let diags = config.diagnostics(cli.config.is_some(), index.as_ref());
    if !diags.is_empty() {
        return Err(config_failure(cli.config.as_deref(), &diags));
    }
    let id = config
        .scenario
        .ok_or_else(|| Failure::Config("no scenario given (use --scenario or the `scenario` field)".into()))?;
    Ok((id, config))
}

fn run(cli: &Cli) -> Result<u8, Failure> {
    let (id, config) = load(cli)?;
    let start = Instant::now();
    let output = run_scenario(id, &config).map_err(|e| Failure::Runtime(e.to_string()))?;
    let record = write_outputs(&cli.out, &output, &config, start.elapsed())
        .map_err(|e| Failure::Runtime(e.to_string()))?;
    if !output.converged {
        eprintln!("{id}: a fit did not converge; outputs written with converged = false");
        return Ok(EXIT_NOT_CONVERGED);
    }
    if !cli.quiet {
        for p in &record.outputs {
            println!("{}", p.display());
        }
    }
    Ok(0)
}

fn validate(path: &Path) -> Result<u8, Failure> {
    let text = read(path)?;
    match ScenarioConfig::load(&text) {
        Ok(_) => {
            println!("{}: ok", path.display());
            Ok(0)
        }
        Err(diags) => Err(config_failure(Some(path), &diags)),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Some(Command::Validate { path }) => validate(path),
        None => run(&cli),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Config(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
