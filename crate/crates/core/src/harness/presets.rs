//! Named, ready-to-run problems.

use std::path::Path;

use super::config::{parse_config_str, RunConfig};
use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    /// Config text in the same JSON format as config files.
    pub config: &'static str,
}

const LIBRARY: [Preset; 7] = [
    Preset {
        name: "duality-linear-1d",
        description: "TV problem on (0, 1) with linear datum u0 = x and f = 0; the value is |Omega| = 1",
        config: r#"{
            "command": "tv",
            "grid": { "dimension": 1, "shape": [16], "spacing": 0.0625 },
            "source": 0,
            "boundary": "x"
        }"#,
    },
    Preset {
        name: "area-linear-1d",
        description: "area problem (mu = 0.5) with linear datum; the linear datum is optimal",
        config: r#"{
            "command": "elliptic",
            "grid": { "dimension": 1, "shape": [16], "spacing": 0.0625 },
            "mu": 0.5,
            "lambda": 0,
            "source": 0,
            "boundary": "x"
        }"#,
    },
    Preset {
        name: "plateau-decay-1d",
        description: "flow of the indicator of (1/4, 3/4) with zero boundary data; extinction at t = 1/4",
        config: r#"{
            "command": "flow",
            "grid": { "dimension": 1, "shape": [32], "spacing": 0.03125 },
            "initial": "step(x - 0.25) * step(0.75 - x)",
            "boundary": 0,
            "tau": 0.001,
            "horizon": 0.5
        }"#,
    },
    Preset {
        name: "zero-flow-1d",
        description: "flow from zero data; every slice is zero",
        config: r#"{
            "command": "flow",
            "grid": { "dimension": 1, "shape": [8], "spacing": 0.125 },
            "initial": 0,
            "boundary": 0,
            "tau": 0.1,
            "horizon": 0.5
        }"#,
    },
    Preset {
        name: "boundary-ramp-1d",
        description: "flow from zero with the time-dependent boundary datum t*x",
        config: r#"{
            "command": "flow",
            "grid": { "dimension": 1, "shape": [8], "spacing": 0.125 },
            "initial": 0,
            "boundary": "t * x",
            "tau": 0.05,
            "horizon": 0.5,
            "verify": { "comparisons": 20 }
        }"#,
    },
    Preset {
        name: "mu-sweep-default",
        description: "regularization sweep mu -> 0 with f = 0 and u0 = (x - 1/2)/2",
        config: r#"{
            "command": "sweep",
            "grid": { "dimension": 1, "shape": [16], "spacing": 0.0625 },
            "source": 0,
            "boundary": "(x - 0.5) / 2",
            "schedule": [0.5, 0.1, 0.02, 0.004]
        }"#,
    },
    Preset {
        name: "feasibility-constant-1d",
        description: "dual-ball membership of g = 1.5 on (0, 1); feasible with norm 3/4",
        config: r#"{
            "command": "feasibility",
            "grid": { "dimension": 1, "shape": [16], "spacing": 0.0625 },
            "source": 1.5
        }"#,
    },
];

pub fn problem_library() -> &'static [Preset] {
    &LIBRARY
}

/// Parsed config of a named preset; relative paths resolve against the
/// current directory.
pub fn preset(name: &str) -> Result<RunConfig, HarnessError> {
    let p = LIBRARY.iter().find(|p| p.name == name).ok_or_else(|| HarnessError::Validation {
        key: "preset".into(),
        message: format!(
            "unknown preset `{name}`; known: {}",
            LIBRARY.iter().map(|p| p.name).collect::<Vec<_>>().join(", ")
        ),
    })?;
    parse_config_str(p.config, &format!("preset {name}"), Path::new(""))
}
