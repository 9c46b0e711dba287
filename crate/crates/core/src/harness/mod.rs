//! Configuration, experiment orchestration and output files for the
//! command-line front end.
//!
//! Exit codes: 0 when every asserted verdict passes, 1 on a violated
//! verdict, 2 on configuration or hypothesis errors, 3 on numerical failure.

mod config;
mod experiment;
mod output;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{parse_config, DomainConfig, OutputPaths, RunConfig};
pub use experiment::{
    run_experiment, ConvergenceRung, ExperimentOutput, ExperimentReport, LemmaSummary, Verdict, VERDICT_SLACK,
};
pub use output::{emit_outputs, OutputFiles};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("missing required key `{0}`")]
    MissingKey(String),
    #[error("invalid value for `{key}`: {message}")]
    InvalidValue { key: String, message: String },
    #[error("hypothesis {hypothesis} violated: {detail}")]
    Hypothesis { hypothesis: String, detail: String },
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{module}: {message}")]
    Numerical { module: &'static str, message: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => EXIT_CONFIG,
            HarnessError::Numerical { .. } | HarnessError::Io { .. } => EXIT_NUMERICAL,
        }
    }

    pub(crate) fn numerical(module: &'static str, err: impl std::fmt::Display) -> Self {
        HarnessError::Numerical {
            module,
            message: err.to_string(),
        }
    }
}

/// Which theorem a configuration is set up to test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Simulate,
    Theorem1,
    Theorem2,
    Theorem3,
    Convergence,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Simulate => "simulate",
            Mode::Theorem1 => "theorem1",
            Mode::Theorem2 => "theorem2",
            Mode::Theorem3 => "theorem3",
            Mode::Convergence => "convergence",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "simulate" => Ok(Mode::Simulate),
            "theorem1" => Ok(Mode::Theorem1),
            "theorem2" => Ok(Mode::Theorem2),
            "theorem3" => Ok(Mode::Theorem3),
            "convergence" => Ok(Mode::Convergence),
            other => Err(format!("unknown mode `{other}`")),
        }
    }
}

/// What `run_experiment` does with a configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Simulate and compare against the bounds of the configured mode.
    Simulate,
    /// Bounds only, from the initial data.
    Bounds,
    /// Eigenvalues and the Robin eigenvalue condition.
    Eigen,
    /// Auxiliary inequalities on seeded random fields.
    CheckLemmas,
    /// Barenblatt error over the resolution ladder.
    Convergence,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Bounds => "bounds",
            Command::Eigen => "eigen",
            Command::CheckLemmas => "check-lemmas",
            Command::Convergence => "convergence",
        }
    }
}
