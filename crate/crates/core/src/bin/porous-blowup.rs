use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use porous_blowup::harness::{
    emit_outputs, parse_config, run_experiment, Command, ConfigError, HarnessError, RunConfig, EXIT_CONFIG,
};

/// Porous-medium reaction-diffusion experiments: simulation, blow-up and
/// global-existence bounds, eigenvalues and inequality checks.
#[derive(Debug, Parser)]
#[command(name = "porous-blowup", version)]
struct Cli {
    /// Experiment configuration (INI-style key = value).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory, overriding `output.dir`.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Random seed, overriding `run.seed`.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Grid resolution, overriding `domain.resolution`.
    #[arg(long, global = true, value_name = "N")]
    resolution: Option<usize>,
    /// Only the exit code reports the outcome.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Simulate and compare the trace against the configured theorem.
    Simulate,
    /// Evaluate the bounds of the configured theorem from the initial data.
    Bounds,
    /// First Dirichlet and Robin eigenvalues and the Robin eigenvalue condition.
    Eigen,
    /// Check the auxiliary inequalities on seeded random fields.
    CheckLemmas,
    /// Barenblatt error over the resolution ladder.
    Convergence,
}

impl From<&Cmd> for Command {
    fn from(c: &Cmd) -> Self {
        match c {
            Cmd::Simulate => Command::Simulate,
            Cmd::Bounds => Command::Bounds,
            Cmd::Eigen => Command::Eigen,
            Cmd::CheckLemmas => Command::CheckLemmas,
            Cmd::Convergence => Command::Convergence,
        }
    }
}

fn load(cli: &Cli) -> Result<RunConfig, HarnessError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| ConfigError::MissingKey("--config".into()))?;
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::InvalidValue {
        key: "--config".into(),
        message: format!("{}: {e}", path.display()),
    })?;
    let mut config = parse_config(&text)?;
    if let Some(dir) = &cli.out {
        config.output.dir = dir.clone();
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(n) = cli.resolution {
        config.domain.resolution = n;
    }
    // overrides may change what validation sees
    Ok(parse_config(&config.to_text())?)
}

fn execute(cli: &Cli) -> Result<i32, HarnessError> {
    let config = load(cli)?;
    let command = Command::from(&cli.command);
    let out = run_experiment(&config, command)?;
    let files = emit_outputs(&out.report, &out.trace, &config.output)?;
    if !cli.quiet {
        let r = &out.report;
        if let Some(status) = &r.status {
            println!("status: {}", serde_json::to_string(status).unwrap_or_default());
        }
        for c in &r.criteria {
            let bound = c.bound.map_or("none".to_string(), |b| format!("{b:e}"));
            println!("{}: applicable = {}, bound = {bound}", c.theorem, c.applicable);
        }
        for v in &r.verdicts {
            let tag = match (v.asserted, v.passed) {
                (false, _) => "INFO",
                (true, true) => "PASS",
                (true, false) => "FAIL",
            };
            println!("{tag} {}: {:e} vs {:e} ({})", v.name, v.value, v.limit, v.detail);
        }
        for d in &r.diagnostics {
            println!("note: {d}");
        }
        println!("trace: {}", files.trace.display());
        println!("report: {}", files.report.display());
    }
    Ok(out.report.exit_code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    let code = match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    if !cli.quiet {
        eprintln!("elapsed: {:.3} s", start.elapsed().as_secs_f64());
    }
    ExitCode::from(u8::try_from(code).unwrap_or(EXIT_CONFIG as u8))
}
