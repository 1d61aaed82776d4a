use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nlqec_cli::error::{CliError, CliResult, EXIT_CONFIG, EXIT_EXACT};
use nlqec_cli::pipeline::{run, Command};
use nlqec_cli::report::to_json;
use nlqec_cli::scenarios::{builtin, NAMES};
use nlqec_cli::sweep::sweep_csv;
use nlqec_cli::ScenarioConfig;
use serde_json::Value;

/// Check the factorization criterion for an alphabet of states under a noise
/// channel, build the recovery, and sweep parameters.
///
/// Exit codes: 0 exact, 2 approximate, 1 failed, 64 config error, 70 numerical error.
#[derive(Debug, Parser)]
#[command(name = "nlqec", version)]
struct Cli {
    #[command(subcommand)]
    command: Option<Cmd>,
    /// Scenario config (JSON). A file holding an array of configs needs --scenario to pick one.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Built-in scenario name, or the entry to pick from a config array.
    #[arg(long, global = true, value_name = "NAME")]
    scenario: Option<String>,
    /// Output file for the report or CSV; defaults to the config's outputs, then stdout.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Worker threads for sweeps.
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    /// Overrides both the sampler and the solver seed.
    #[arg(long, global = true, value_name = "S")]
    seed: Option<u64>,
    /// Print the config of a built-in scenario and exit.
    #[arg(long, global = true, value_name = "NAME")]
    emit_config: Option<String>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Cmd {
    /// Solve the criterion and classify the residual.
    Check,
    /// Solve, then build the recovery and report fidelities.
    Recover,
    /// Run the config's sweep axes and write a CSV table.
    Sweep,
}

fn unknown_scenario(name: &str) -> CliError {
    CliError::Config(format!("unknown scenario {name:?}; built-ins are {}", NAMES.join(", ")))
}

fn load(cli: &Cli) -> CliResult<ScenarioConfig> {
    let mut cfg = match (&cli.config, &cli.scenario) {
        (Some(path), pick) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            let value: Value = serde_json::from_str(&text).map_err(|e| CliError::Config(e.to_string()))?;
            match (value, pick) {
                (Value::Array(items), Some(name)) => {
                    let item = items
                        .into_iter()
                        .find(|v| v.get("name").and_then(Value::as_str) == Some(name))
                        .ok_or_else(|| CliError::Config(format!("no scenario named {name:?} in {}", path.display())))?;
                    ScenarioConfig::from_value(item)?
                }
                (Value::Array(_), None) => {
                    return Err(CliError::Config("config holds several scenarios; pass --scenario".into()))
                }
                (value, pick) => {
                    let cfg = ScenarioConfig::from_value(value)?;
                    if let Some(name) = pick.as_ref().filter(|n| **n != cfg.name) {
                        return Err(CliError::Config(format!("config is {:?}, not {name:?}", cfg.name)));
                    }
                    cfg
                }
            }
        }
        (None, Some(name)) => builtin(name).ok_or_else(|| unknown_scenario(name))?,
        (None, None) => return Err(CliError::Config("pass --config or --scenario".into())),
    };
    if let Some(seed) = cli.seed {
        cfg.alphabet.seed = seed;
        cfg.solver.seed = seed;
    }
    Ok(cfg)
}

fn write_out(path: Option<&Path>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|source| CliError::Io { path: p.display().to_string(), source }),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|source| CliError::Io { path: "<stdout>".into(), source }),
    }
}

fn execute(cli: &Cli) -> CliResult<u8> {
    if let Some(name) = &cli.emit_config {
        let cfg = builtin(name).ok_or_else(|| unknown_scenario(name))?;
        write_out(cli.out.as_deref(), &to_json(&cfg))?;
        return Ok(EXIT_EXACT);
    }
    let cmd = cli.command.ok_or_else(|| CliError::Config("missing subcommand: check, recover or sweep".into()))?;
    let cfg = load(cli)?;
    match cmd {
        Cmd::Check | Cmd::Recover => {
            let command = if matches!(cmd, Cmd::Check) { Command::Check } else { Command::Recover };
            let outcome = run(&cfg, command)?;
            let out = cli.out.clone().or_else(|| cfg.outputs.report.clone().map(PathBuf::from));
            write_out(out.as_deref(), &to_json(&outcome.report))?;
            let r = &outcome.report;
            let fid = r
                .recovery
                .as_ref()
                .map(|x| format!(", min fidelity {:.6}", x.min_fidelity))
                .unwrap_or_default();
            eprintln!("{}: residual_rel {:.3e} ({:?}){fid}", cfg.name, r.criterion.residual_rel, r.verdict.class);
            Ok(outcome.exit_code)
        }
        Cmd::Sweep => {
            let csv = sweep_csv(&cfg, cli.jobs)?;
            let out = cli
                .out
                .clone()
                .or_else(|| cfg.outputs.sweep.as_ref().and_then(|s| s.csv.clone()).map(PathBuf::from));
            write_out(out.as_deref(), &csv)?;
            Ok(EXIT_EXACT)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("NLQEC_LOG", "error")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_EXACT };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("nlqec: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
