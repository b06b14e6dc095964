//! Strict JSON run configurations.
//!
//! Physics parameters have no defaults; solver and verifier settings do.
//! Every key is checked against the set allowed for the command before any
//! typed decoding, so a misspelt key is reported by name.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::expr::{Expr, Var};
use super::HarnessError;
use crate::domain::{build_grid, read_csv, read_raw, Grid, GridSpec, ScalarField};
use crate::elliptic::SolverConfig;
use crate::error::Result as CoreResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Elliptic,
    Tv,
    Flow,
    Sweep,
    Verify,
    Feasibility,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::Elliptic,
        Command::Tv,
        Command::Flow,
        Command::Sweep,
        Command::Verify,
        Command::Feasibility,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Elliptic => "elliptic",
            Command::Tv => "tv",
            Command::Flow => "flow",
            Command::Sweep => "sweep",
            Command::Verify => "verify",
            Command::Feasibility => "feasibility",
        }
    }

    /// Keys that must be present, then keys that may be present.
    fn keys(self) -> (&'static [&'static str], &'static [&'static str]) {
        match self {
            Command::Elliptic => (&["grid", "mu", "lambda", "source", "boundary"], &[]),
            Command::Tv => (&["grid", "source", "boundary"], &[]),
            Command::Flow => (&["grid", "initial", "boundary", "tau", "horizon"], &["verify"]),
            Command::Sweep => (&["grid", "source", "boundary", "schedule"], &[]),
            Command::Verify => (&["solution"], &["verify"]),
            Command::Feasibility => (&["grid", "source"], &[]),
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown command `{s}`"))
    }
}

const COMMON_KEYS: [&str; 5] = ["command", "solver", "seed", "output", "fields"];
const ALL_KEYS: [&str; 14] = [
    "grid", "mu", "lambda", "source", "boundary", "initial", "tau", "horizon", "schedule", "solution", "verify",
    "solver", "seed", "output",
];
const GRID_KEYS: [&str; 5] = ["dimension", "shape", "spacing", "collar_width", "origin"];
const SOLVER_KEYS: [&str; 6] = [
    "max_iterations",
    "tolerance",
    "primal_step",
    "dual_step",
    "newton_tolerance",
    "check_every",
];
const VERIFY_KEYS: [&str; 2] = ["comparisons", "tolerance"];

/// A datum: a constant, a closed-form expression, or a field file.
#[derive(Debug, Clone, PartialEq)]
pub enum DatumSpec {
    Constant(f64),
    Expression { source: String, expr: Expr },
    Csv(PathBuf),
    Raw(PathBuf),
}

impl DatumSpec {
    pub fn depends_on_time(&self) -> bool {
        matches!(self, DatumSpec::Expression { expr, .. } if expr.uses(Var::T))
    }

    /// Samples the datum at time t. Relative file paths resolve against
    /// `base`.
    pub fn load(&self, grid: &Grid, t: f64, base: &Path) -> CoreResult<ScalarField> {
        match self {
            DatumSpec::Constant(c) => Ok(ScalarField::constant(grid, *c)),
            DatumSpec::Expression { expr, .. } => ScalarField::from_fn(grid, |[x, y]| expr.eval(x, y, t)),
            DatumSpec::Csv(p) => read_csv(&base.join(p), grid),
            DatumSpec::Raw(p) => read_raw(&base.join(p), grid),
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            DatumSpec::Constant(c) => Value::from(*c),
            DatumSpec::Expression { source, .. } => Value::from(source.clone()),
            DatumSpec::Csv(p) => serde_json::json!({ "csv": p.display().to_string() }),
            DatumSpec::Raw(p) => serde_json::json!({ "raw": p.display().to_string() }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldFormat {
    Csv,
    Raw,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySettings {
    pub comparisons: usize,
    pub tolerance: f64,
}

impl Default for VerifySettings {
    fn default() -> Self {
        VerifySettings {
            comparisons: 100,
            tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub grid: Option<GridSpec>,
    pub mu: Option<f64>,
    pub lambda: Option<f64>,
    pub source: Option<DatumSpec>,
    pub boundary: Option<DatumSpec>,
    pub initial: Option<DatumSpec>,
    pub tau: Option<f64>,
    pub horizon: Option<f64>,
    pub schedule: Option<Vec<f64>>,
    pub solution: Option<PathBuf>,
    pub solver: SolverConfig,
    pub verify: VerifySettings,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub fields: FieldFormat,
    /// Directory against which relative paths resolve.
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn grid(&self) -> CoreResult<Grid> {
        build_grid(self.grid.as_ref().expect("validated config has a grid"))
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        self.base_dir.join(p)
    }

    /// Canonical JSON form; parsing it back yields the same config.
    pub fn to_json(&self) -> Value {
        let mut m = Map::new();
        m.insert("command".into(), Value::from(self.command.name()));
        if let Some(g) = &self.grid {
            m.insert("grid".into(), serde_json::to_value(g).expect("grid serializes"));
        }
        let num = |v: f64| Value::from(v);
        for (k, v) in [("mu", self.mu), ("lambda", self.lambda), ("tau", self.tau), ("horizon", self.horizon)] {
            if let Some(v) = v {
                m.insert(k.into(), num(v));
            }
        }
        for (k, d) in [("source", &self.source), ("boundary", &self.boundary), ("initial", &self.initial)] {
            if let Some(d) = d {
                m.insert(k.into(), d.to_json());
            }
        }
        if let Some(s) = &self.schedule {
            m.insert("schedule".into(), Value::from(s.clone()));
        }
        if let Some(p) = &self.solution {
            m.insert("solution".into(), Value::from(p.display().to_string()));
        }
        m.insert("solver".into(), serde_json::to_value(&self.solver).expect("solver serializes"));
        if matches!(self.command, Command::Flow | Command::Verify) {
            m.insert("verify".into(), serde_json::to_value(self.verify).expect("verify serializes"));
        }
        m.insert("seed".into(), Value::from(self.seed));
        if let Some(p) = &self.output {
            m.insert("output".into(), Value::from(p.display().to_string()));
        }
        m.insert("fields".into(), serde_json::to_value(self.fields).expect("format serializes"));
        Value::Object(m)
    }
}

fn validation(key: impl Into<String>, message: impl Into<String>) -> HarnessError {
    HarnessError::Validation {
        key: key.into(),
        message: message.into(),
    }
}

/// Reads and validates a config file.
pub fn parse_config(path: &Path) -> Result<RunConfig, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Parse {
        path: path.display().to_string(),
        line: None,
        message: format!("cannot read config: {e}"),
    })?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_config_str(&text, &path.display().to_string(), &base)
}

/// Validates config text; `origin` names the source in error messages and
/// `base` anchors relative paths.
pub fn parse_config_str(text: &str, origin: &str, base: &Path) -> Result<RunConfig, HarnessError> {
    let value: Value = serde_json::from_str(text).map_err(|e| HarnessError::Parse {
        path: origin.to_string(),
        line: Some(e.line()),
        message: e.to_string(),
    })?;
    let Value::Object(obj) = value else {
        return Err(HarnessError::Parse {
            path: origin.to_string(),
            line: Some(1),
            message: "top level must be a JSON object".into(),
        });
    };

    let command = match obj.get("command") {
        Some(Value::String(s)) => s.parse::<Command>().map_err(|e| validation("command", e))?,
        Some(_) => return Err(validation("command", "must be a string")),
        None => return Err(validation("command", "missing required key")),
    };
    let (required, optional) = command.keys();
    for key in obj.keys() {
        let known = COMMON_KEYS.contains(&key.as_str()) || ALL_KEYS.contains(&key.as_str());
        if !known {
            return Err(validation(key.clone(), "unknown key"));
        }
        let allowed = COMMON_KEYS.contains(&key.as_str())
            || required.contains(&key.as_str())
            || optional.contains(&key.as_str());
        if !allowed {
            return Err(validation(key.clone(), format!("does not apply to command `{command}`")));
        }
    }
    for key in required {
        if !obj.contains_key(*key) {
            return Err(validation(*key, "missing required key"));
        }
    }

    let mut cfg = RunConfig {
        command,
        grid: None,
        mu: None,
        lambda: None,
        source: None,
        boundary: None,
        initial: None,
        tau: None,
        horizon: None,
        schedule: None,
        solution: None,
        solver: SolverConfig::default(),
        verify: VerifySettings::default(),
        seed: 0,
        output: None,
        fields: FieldFormat::Csv,
        base_dir: base.to_path_buf(),
    };

    if let Some(v) = obj.get("grid") {
        check_keys(v, "grid", &GRID_KEYS)?;
        let spec: GridSpec = typed(v, "grid")?;
        build_grid(&spec).map_err(|e| validation("grid", e.to_string()))?;
        cfg.grid = Some(spec);
    }
    if let Some(v) = obj.get("solver") {
        check_keys(v, "solver", &SOLVER_KEYS)?;
        cfg.solver = typed(v, "solver")?;
        if let Some(g) = &cfg.grid {
            let grid = build_grid(g).map_err(|e| validation("grid", e.to_string()))?;
            cfg.solver.validate(&grid).map_err(|e| validation("solver", e.to_string()))?;
        }
    }
    if let Some(v) = obj.get("verify") {
        check_keys(v, "verify", &VERIFY_KEYS)?;
        cfg.verify = typed(v, "verify")?;
        if !(cfg.verify.tolerance > 0.0) {
            return Err(validation("verify.tolerance", "must be positive"));
        }
    }
    if let Some(v) = obj.get("seed") {
        cfg.seed = typed(v, "seed")?;
    }
    if let Some(v) = obj.get("output") {
        cfg.output = Some(PathBuf::from(typed::<String>(v, "output")?));
    }
    if let Some(v) = obj.get("fields") {
        cfg.fields = typed(v, "fields")?;
    }

    let nonneg = |key: &str| -> Result<Option<f64>, HarnessError> {
        match obj.get(key) {
            None => Ok(None),
            Some(v) => {
                let x: f64 = typed(v, key)?;
                if !(x.is_finite() && x >= 0.0) {
                    return Err(validation(key, format!("must be finite and ≥ 0, got {x}")));
                }
                Ok(Some(x))
            }
        }
    };
    cfg.mu = nonneg("mu")?;
    cfg.lambda = nonneg("lambda")?;
    cfg.tau = nonneg("tau")?;
    cfg.horizon = nonneg("horizon")?;
    if let Some(tau) = cfg.tau {
        if tau == 0.0 {
            return Err(validation("tau", "must be positive"));
        }
        if cfg.horizon.is_some_and(|h| h < tau) {
            return Err(validation("horizon", "must be at least tau"));
        }
    }
    if let Some(v) = obj.get("schedule") {
        let s: Vec<f64> = typed(v, "schedule")?;
        if s.is_empty() || s.iter().any(|&m| !(m > 0.0 && m <= 1.0)) {
            return Err(validation("schedule", "entries must lie in (0, 1]"));
        }
        if s.windows(2).any(|w| w[1] >= w[0]) {
            return Err(validation("schedule", "must be strictly decreasing"));
        }
        cfg.schedule = Some(s);
    }
    if let Some(v) = obj.get("solution") {
        let p = PathBuf::from(typed::<String>(v, "solution")?);
        require_file(base, &p)?;
        cfg.solution = Some(p);
    }

    let time_ok = command == Command::Flow;
    for key in ["source", "boundary", "initial"] {
        if let Some(v) = obj.get(key) {
            let d = datum(v, key, base)?;
            if d.depends_on_time() && !(time_ok && key == "boundary") {
                return Err(validation(key, "`t` may only appear in the boundary datum of a flow"));
            }
            match key {
                "source" => cfg.source = Some(d),
                "boundary" => cfg.boundary = Some(d),
                _ => cfg.initial = Some(d),
            }
        }
    }
    Ok(cfg)
}

fn check_keys(v: &Value, section: &str, allowed: &[&str]) -> Result<(), HarnessError> {
    let Value::Object(m) = v else {
        return Err(validation(section, "must be an object"));
    };
    for k in m.keys() {
        if !allowed.contains(&k.as_str()) {
            return Err(validation(format!("{section}.{k}"), "unknown key"));
        }
    }
    Ok(())
}

fn typed<T: serde::de::DeserializeOwned>(v: &Value, key: &str) -> Result<T, HarnessError> {
    serde_json::from_value(v.clone()).map_err(|e| validation(key, e.to_string()))
}

fn require_file(base: &Path, p: &Path) -> Result<(), HarnessError> {
    let full = base.join(p);
    if !full.is_file() {
        return Err(HarnessError::Parse {
            path: full.display().to_string(),
            line: None,
            message: "referenced file does not exist".into(),
        });
    }
    Ok(())
}

fn datum(v: &Value, key: &str, base: &Path) -> Result<DatumSpec, HarnessError> {
    match v {
        Value::Number(n) => {
            let c = n.as_f64().ok_or_else(|| validation(key, "number out of range"))?;
            Ok(DatumSpec::Constant(c))
        }
        Value::String(s) => {
            let expr = Expr::parse(s).map_err(|e| validation(key, format!("expression `{s}` {e}")))?;
            Ok(DatumSpec::Expression {
                source: s.clone(),
                expr,
            })
        }
        Value::Object(m) if m.len() == 1 => {
            let (kind, p) = m.iter().next().expect("one entry");
            let Value::String(p) = p else {
                return Err(validation(format!("{key}.{kind}"), "must be a path string"));
            };
            let p = PathBuf::from(p);
            let spec = match kind.as_str() {
                "csv" => DatumSpec::Csv(p.clone()),
                "raw" => DatumSpec::Raw(p.clone()),
                other => return Err(validation(format!("{key}.{other}"), "unknown key; use `csv` or `raw`")),
            };
            require_file(base, &p)?;
            Ok(spec)
        }
        _ => Err(validation(
            key,
            "datum must be a number, an expression string, or {\"csv\": path} / {\"raw\": path}",
        )),
    }
}
