//! Operational shell: configuration ingestion, the named problem library,
//! dispatch to the solvers and emission of certificates.

mod config;
pub mod expr;
mod presets;
mod run;

pub use config::{parse_config, parse_config_str, Command, DatumSpec, FieldFormat, RunConfig, VerifySettings};
pub use presets::{preset, problem_library, Preset};
pub use run::{run, run_in, EllipticSolutionFile, FlowSolutionFile, SolutionFile};

use serde::{Deserialize, Serialize};

use crate::error::Error;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CERTIFICATE: i32 = 2;
pub const EXIT_NONCONVERGENCE: i32 = 3;
pub const EXIT_CONFIG: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("parse error in {path}{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Parse {
        path: String,
        line: Option<usize>,
        message: String,
    },

    #[error("invalid config key `{key}`: {message}")]
    Validation { key: String, message: String },

    #[error(transparent)]
    Core(#[from] Error),

    #[error("cannot write {path}: {source}")]
    Output {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Parse { .. } | HarnessError::Validation { .. } => EXIT_CONFIG,
            HarnessError::Output { .. } => EXIT_IO,
            HarnessError::Core(e) => core_exit_code(e),
        }
    }
}

fn core_exit_code(e: &Error) -> i32 {
    match e {
        Error::NonConvergence { .. } => EXIT_NONCONVERGENCE,
        // no certificate exists for an unbounded problem
        Error::UnboundedBelow { .. } => EXIT_CERTIFICATE,
        Error::Step { source, .. } => core_exit_code(source),
        Error::Io { .. } => EXIT_IO,
        Error::InvalidGrid(_)
        | Error::SizeMismatch { .. }
        | Error::NonFinite(_)
        | Error::InvalidParameter { .. }
        | Error::OutsideUnitBall(_)
        | Error::CollarMismatch { .. }
        | Error::Format { .. } => EXIT_CONFIG,
    }
}

/// One certificate invariant: `value ≤ limit`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub detail: Option<String>,
}

impl Check {
    pub fn le(name: &str, value: f64, limit: f64) -> Check {
        Check {
            name: name.to_string(),
            value,
            limit,
            passed: value <= limit,
            detail: None,
        }
    }

    pub fn flag(name: &str, ok: bool) -> Check {
        Check {
            name: name.to_string(),
            value: if ok { 0.0 } else { 1.0 },
            limit: 0.0,
            passed: ok,
            detail: None,
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Check {
        self.detail = Some(detail.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: Command,
    pub passed: bool,
    pub checks: Vec<Check>,
    /// Files written, relative to the output directory.
    pub files: Vec<String>,
}

impl RunReport {
    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed {
            EXIT_PASS
        } else {
            EXIT_CERTIFICATE
        }
    }
}
