use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use eit_sim::config::{parse_value, ConfigError, ScenarioConfig};
use eit_sim::output::{summary_json, write_record, write_sweep};
use eit_sim::runner::{run_scenario, run_sweep, RunError};
use eit_sim::scenarios;

#[derive(Parser)]
#[command(name = "eit-sim", version, about = "Run light-propagation scenarios from TOML configs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file or a shipped scenario by name. A config with a
    /// [sweep] section runs every member.
    Run {
        scenario: String,
        /// Output directory; defaults to results/<name>.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Grid refinement: coarse, default, fine, or a factor dividing the
        /// time and cell steps.
        #[arg(long, value_parser = parse_resolution)]
        resolution: Option<f64>,
        /// Threads for sweeps.
        #[arg(long, default_value_t = default_workers())]
        workers: usize,
    },
    /// List the shipped scenarios.
    List,
    /// Check a config without running it.
    Validate { scenario: String },
    /// Run a scenario once per value of a dotted parameter path.
    Sweep {
        scenario: String,
        #[arg(long)]
        param: String,
        /// Comma-separated values, e.g. "1 MHz,2 MHz" or 0.2,0.5.
        #[arg(long, value_delimiter = ',')]
        values: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = default_workers())]
        workers: usize,
    },
}

fn parse_resolution(text: &str) -> Result<f64, String> {
    match text {
        "coarse" => Ok(0.5),
        "default" => Ok(1.0),
        "fine" => Ok(2.0),
        _ => text.parse().map_err(|_| format!("expected coarse, default, fine or a number, got {text:?}")),
    }
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Run(#[from] RunError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("writing results: {0}")]
    Io(#[from] std::io::Error),
    #[error("sweep member {index} failed: {message}")]
    Member { index: usize, kind: &'static str, message: String },
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Run(e) => e.kind(),
            CliError::Config(_) => "config",
            CliError::Io(_) => "io",
            CliError::Member { kind, .. } => kind,
        }
    }
}

fn load(scenario: &str) -> Result<ScenarioConfig, ConfigError> {
    let path = Path::new(scenario);
    if path.exists() {
        return ScenarioConfig::from_path(path);
    }
    scenarios::load(scenario).unwrap_or_else(|| {
        Err(ConfigError::Io {
            path: scenario.to_string(),
            message: format!("no such file or shipped scenario (known: {})", scenarios::names().collect::<Vec<_>>().join(", ")),
        })
    })
}

fn sweep(config: &ScenarioConfig, param: &str, values: &[toml::Value], workers: usize, out: &Path) -> Result<(), CliError> {
    let members = run_sweep(config, param, values, workers)?;
    write_sweep(param, &members, out)?;
    let failed = members.iter().filter(|(_, r)| r.is_err()).count();
    eprintln!("{} of {} members succeeded; results in {}", members.len() - failed, members.len(), out.display());
    match members.iter().enumerate().find_map(|(i, (_, r))| r.as_ref().err().map(|e| (i, e))) {
        Some((index, e)) => Err(CliError::Member { index, kind: e.kind(), message: e.to_string() }),
        None => Ok(()),
    }
}

fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::List => {
            for name in scenarios::names() {
                let c = scenarios::load(name).expect("listed").expect("shipped scenarios parse");
                println!("{name:28} {}", c.description);
            }
        }
        Command::Validate { scenario } => {
            let c = load(&scenario)?;
            c.prepare()?;
            if let Some(s) = &c.sweep {
                for v in &s.values {
                    c.with_parameter(&s.parameter, v)?.prepare()?;
                }
            }
            println!("{}: ok", c.name);
        }
        Command::Run { scenario, out, resolution, workers } => {
            let mut c = load(&scenario)?;
            if let Some(f) = resolution {
                c = c.with_resolution(f)?;
            }
            let out = out.unwrap_or_else(|| Path::new("results").join(&c.name));
            match c.sweep.clone() {
                Some(s) => sweep(&c, &s.parameter, &s.values, workers, &out)?,
                None => {
                    let record = run_scenario(&c)?;
                    write_record(&record, &out)?;
                    print!("{}", summary_json(&record));
                }
            }
        }
        Command::Sweep { scenario, param, values, out, workers } => {
            let c = load(&scenario)?;
            let values: Vec<_> = values.iter().map(|v| parse_value(v.trim())).collect();
            let out = out.unwrap_or_else(|| Path::new("results").join(format!("{}_sweep", c.name)));
            sweep(&c, &param, &values, workers, &out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", serde_json::json!({ "error": e.kind(), "message": e.to_string() }));
            ExitCode::FAILURE
        }
    }
}
