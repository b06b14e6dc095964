use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::config::{Command, FieldFormat, RunConfig, VerifySettings};
use super::{Check, HarnessError, RunReport};
use crate::anzellotti::pairing;
use crate::domain::{csv_string, divergence, extend_with_boundary, raw_bytes, FaceField, Grid, GridSpec, ScalarField};
use crate::elliptic::{certificate, dual_feasibility, minimize_psi, mu_sweep, SolverConfig};
use crate::energy::{total_variation, EnergyParams};
use crate::error::Error;
use crate::flow::{
    comparison_family, solve_flow, verify_trajectory, verify_variational, verify_weak, FlowProblem, VerifyOptions,
};

/// Everything needed to re-check an elliptic or TV solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EllipticSolutionFile {
    pub grid: GridSpec,
    pub mu: f64,
    pub lambda: f64,
    /// True for the plain TV problem, where the maximal pairing
    /// (z, Du)_{u₀} = ‖Du‖(Ω̄) is part of the certificate.
    pub maximal_pairing: bool,
    pub tolerance: f64,
    pub source: ScalarField,
    pub boundary: ScalarField,
    pub u: ScalarField,
    pub z: FaceField,
}

/// Everything needed to re-check a flow: all states, dual fields and
/// boundary data by time node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSolutionFile {
    pub grid: GridSpec,
    pub tau: f64,
    pub seed: u64,
    pub verify: VerifySettings,
    pub boundary: Vec<ScalarField>,
    pub states: Vec<ScalarField>,
    pub fields: Vec<FaceField>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SolutionFile {
    Elliptic(EllipticSolutionFile),
    Flow(FlowSolutionFile),
}

struct Writer {
    dir: PathBuf,
    format: FieldFormat,
    files: Vec<String>,
}

impl Writer {
    fn new(dir: &Path, format: FieldFormat) -> Result<Self, HarnessError> {
        fs::create_dir_all(dir).map_err(|e| output_err(dir, e))?;
        Ok(Writer {
            dir: dir.to_path_buf(),
            format,
            files: Vec::new(),
        })
    }

    fn bytes(&mut self, name: &str, data: &[u8]) -> Result<(), HarnessError> {
        let path = self.dir.join(name);
        fs::write(&path, data).map_err(|e| output_err(&path, e))?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<(), HarnessError> {
        let mut text = serde_json::to_string_pretty(value).expect("report types serialize");
        text.push('\n');
        self.bytes(name, text.as_bytes())
    }

    fn field(&mut self, stem: &str, grid: &Grid, field: &ScalarField) -> Result<(), HarnessError> {
        match self.format {
            FieldFormat::Csv => self.bytes(&format!("{stem}.csv"), csv_string(grid, field).as_bytes()),
            FieldFormat::Raw => self.bytes(&format!("{stem}.raw"), &raw_bytes(grid, field)),
            FieldFormat::None => Ok(()),
        }
    }
}

fn output_err(path: &Path, source: std::io::Error) -> HarnessError {
    HarnessError::Output {
        path: path.display().to_string(),
        source,
    }
}

/// Runs the config, writing artifacts to its output directory (relative
/// paths resolve against the config's directory; default `tvflow-out`).
pub fn run(cfg: &RunConfig) -> Result<RunReport, HarnessError> {
    let dir = cfg.output.clone().unwrap_or_else(|| PathBuf::from("tvflow-out"));
    run_in(cfg, &cfg.resolve(&dir))
}

/// Runs the config with an explicit output directory.
pub fn run_in(cfg: &RunConfig, dir: &Path) -> Result<RunReport, HarnessError> {
    let mut w = Writer::new(dir, cfg.fields)?;
    let checks = match cfg.command {
        Command::Elliptic | Command::Tv => run_elliptic(cfg, &mut w)?,
        Command::Flow => run_flow(cfg, &mut w)?,
        Command::Sweep => run_sweep(cfg, &mut w)?,
        Command::Feasibility => run_feasibility(cfg, &mut w)?,
        Command::Verify => run_verify(cfg)?,
    };
    let passed = checks.iter().all(|c| c.passed);
    w.json("checks.json", &json!({ "command": cfg.command, "passed": passed, "seed": cfg.seed, "checks": checks }))?;
    Ok(RunReport {
        command: cfg.command,
        passed,
        checks,
        files: w.files,
    })
}

fn load(cfg: &RunConfig, grid: &Grid, d: &Option<super::DatumSpec>, t: f64) -> Result<ScalarField, HarnessError> {
    Ok(d.as_ref().expect("validated config has the datum").load(grid, t, &cfg.base_dir)?)
}

fn elliptic_checks(
    grid: &Grid,
    params: &EnergyParams,
    u: &ScalarField,
    z: &FaceField,
    tol: f64,
    with_pairing: bool,
) -> Result<Vec<Check>, HarnessError> {
    let c = certificate(grid, params, u, z, 0)?;
    let scale = c.scale();
    let div_scale = 1.0 + params.source.interior_linf(grid) + params.lambda.abs() * u.interior_linf(grid);
    let mut checks = vec![
        Check::le("weak_duality", -c.gap, 1e-8 * scale),
        Check::le("duality_gap", c.gap.abs(), tol * scale),
        Check::le("divergence", c.div_residual_linf, tol * div_scale),
        Check::le("z_bound", c.feasibility_excess, 1e-9),
    ];
    if params.mu > 0.0 {
        checks.push(Check::le("optimality_relation", c.optimality_residual, tol));
    }
    if with_pairing {
        let tv = total_variation(grid, u, &params.boundary)?;
        let p = pairing(grid, z, u, &params.boundary)?.value;
        // at an exact solution the residual is bounded by the gap plus the
        // divergence defect tested against u − u₀
        let l1: f64 = grid
            .interior_cells()
            .iter()
            .map(|&k| (u.values()[k] - params.boundary.values()[k]).abs())
            .sum::<f64>()
            * grid.cell_volume();
        checks.push(Check::le(
            "maximal_pairing",
            (p - tv).abs(),
            tol * scale + c.div_residual_linf * l1 + 1e-12,
        ));
    }
    Ok(checks)
}

fn run_elliptic(cfg: &RunConfig, w: &mut Writer) -> Result<Vec<Check>, HarnessError> {
    let grid = cfg.grid()?;
    let f = load(cfg, &grid, &cfg.source, 0.0)?;
    let u0 = load(cfg, &grid, &cfg.boundary, 0.0)?;
    let (mu, lambda) = match cfg.command {
        Command::Tv => (0.0, 0.0),
        _ => (cfg.mu.unwrap_or(0.0), cfg.lambda.unwrap_or(0.0)),
    };
    let params = EnergyParams::new(&grid, mu, lambda, f, u0)?;
    let sol = minimize_psi(&grid, &params, &cfg.solver)?;
    let with_pairing = cfg.command == Command::Tv;
    let checks = elliptic_checks(&grid, &params, &sol.u, &sol.z, cfg.solver.tolerance, with_pairing)?;

    let cert = &sol.certificate;
    w.json(
        "certificate.json",
        &json!({
            "command": cfg.command,
            "problem": {
                "grid": grid.spec(),
                "mu": mu,
                "lambda": lambda,
                "source": cfg.source.as_ref().map(|d| d.to_json()),
                "boundary": cfg.boundary.as_ref().map(|d| d.to_json()),
            },
            "primal_value": cert.primal_value,
            "dual_value": cert.dual_value,
            "gap": cert.gap,
            "div_residual_linf": cert.div_residual_linf,
            "z_linf": cert.z_linf,
            "feasibility_excess": cert.feasibility_excess,
            "optimality_residual": cert.optimality_residual,
            "upper_estimate": cert.upper_estimate,
            "iterations": cert.iterations,
            "seed": cfg.seed,
        }),
    )?;
    w.json(
        "solution.json",
        &SolutionFile::Elliptic(EllipticSolutionFile {
            grid: grid.spec(),
            mu,
            lambda,
            maximal_pairing: with_pairing,
            tolerance: cfg.solver.tolerance,
            source: params.source.clone(),
            boundary: params.boundary.clone(),
            u: sol.u.clone(),
            z: sol.z.clone(),
        }),
    )?;
    w.field("u", &grid, &sol.u)?;
    Ok(checks)
}

/// Worst normalized value over slices, remembering where it occurred.
struct Worst {
    value: f64,
    at: usize,
}

impl Worst {
    fn new() -> Self {
        Worst {
            value: f64::NEG_INFINITY,
            at: 0,
        }
    }

    fn update(&mut self, v: f64, k: usize) {
        if v > self.value || v.is_nan() {
            self.value = v;
            self.at = k;
        }
    }

    fn check(&self, name: &str, limit: f64) -> Check {
        let v = if self.value == f64::NEG_INFINITY { 0.0 } else { self.value };
        Check::le(name, v, limit).with_detail(format!("worst at slice {}", self.at))
    }
}

/// Re-verifies a trajectory from its states, dual fields and boundary
/// data. Residuals are divided by 1 + ‖Du^k‖(Ω̄) before comparison with the
/// verifier tolerance.
#[allow(clippy::too_many_arguments)]
fn flow_checks(
    grid: &Grid,
    tau: f64,
    states: &[ScalarField],
    fields: &[FaceField],
    boundary: &[ScalarField],
    settings: &VerifySettings,
    seed: u64,
    solver: &SolverConfig,
) -> Result<Vec<Check>, HarnessError> {
    if states.len() != fields.len() || states.len() != boundary.len() || states.is_empty() {
        return Err(Error::param("states", "states, fields and boundary data must have one entry per node").into());
    }
    for (k, ((u, z), b)) in states.iter().zip(fields).zip(boundary).enumerate() {
        u.check(grid)?;
        z.check(grid)?;
        b.check(grid)?;
        if !u.collar_matches(b, grid, 0.0) {
            return Err(Error::CollarMismatch { index: k }.into());
        }
    }
    let tol = settings.tolerance;
    let time_independent = boundary.iter().all(|b| b.collar_matches(&boundary[0], grid, 0.0));
    let (mut zb, mut dv, mut mp, mut id, mut var, mut energy) =
        (Worst::new(), Worst::new(), Worst::new(), Worst::new(), Worst::new(), Worst::new());
    let mut infeasible = Vec::new();
    let mut tv_sum = 0.0;
    for k in 1..states.len() {
        let (u, z, b) = (&states[k], &fields[k], &boundary[k]);
        let prev = &states[k - 1];
        let tv = total_variation(grid, u, b)?;
        tv_sum += tau * tv;
        let mut family = vec![u.clone(), extend_with_boundary(grid, prev, b)?, b.clone()];
        family.extend(comparison_family(grid, u, b, settings.comparisons, seed, k)?);
        let scale = 1.0 + tv;
        let weak = verify_weak(grid, u, z, prev, b, tau, &family, tol * scale)?;
        zb.update((weak.z_linf - 1.0) / scale, k);
        dv.update(weak.div_residual / scale, k);
        mp.update(weak.pairing_residual / scale, k);
        id.update(weak.identity_residual / scale, k);
        let v = verify_variational(grid, u, prev, b, tau, &family, tol * scale)?;
        var.update(v.worst_violation / scale, k);
        if time_independent {
            let tv_prev = total_variation(grid, prev, b)?;
            let l2 = u.sub(prev).interior_l2(grid);
            energy.update((tv + l2 * l2 / tau - tv_prev) / (1.0 + tv_prev), k);
        }
        let dt = ScalarField::new(
            grid,
            (0..grid.cell_count())
                .map(|c| if grid.is_interior(c) { (u.values()[c] - prev.values()[c]) / tau } else { 0.0 })
                .collect(),
        )?;
        if !dual_feasibility(grid, &dt, solver)?.feasible {
            infeasible.push(k);
        }
    }
    let traj = verify_trajectory(grid, states, boundary, tau, settings.comparisons, seed)?;
    let mut checks = vec![
        zb.check("z_bound", tol),
        dv.check("divergence", tol),
        mp.check("maximal_pairing", tol),
        id.check("weak_identity", tol),
        var.check("variational", tol),
        Check::le("trajectory", traj.worst_violation / (1.0 + tv_sum), tol),
    ];
    if time_independent {
        checks.push(energy.check("energy_dissipation", 1e-8));
    }
    let mut feas = Check::flag("dual_norm_of_dt", infeasible.is_empty());
    if let Some(k) = infeasible.first() {
        feas = feas.with_detail(format!("{} infeasible slices, first {k}", infeasible.len()));
    }
    checks.push(feas);
    Ok(checks)
}

fn run_flow(cfg: &RunConfig, w: &mut Writer) -> Result<Vec<Check>, HarnessError> {
    let grid = cfg.grid()?;
    let initial = load(cfg, &grid, &cfg.initial, 0.0)?;
    let tau = cfg.tau.expect("validated");
    let horizon = cfg.horizon.expect("validated");
    let bspec = cfg.boundary.as_ref().expect("validated");
    let problem = FlowProblem::with_boundary(grid.clone(), initial, tau, horizon, |_, t| {
        bspec.load(&grid, t, &cfg.base_dir)
    })?;
    let opts = VerifyOptions {
        comparisons: cfg.verify.comparisons,
        seed: cfg.seed,
        tolerance: cfg.verify.tolerance,
    };
    let sol = solve_flow(&problem, &cfg.solver, &opts)?;
    let states: Vec<ScalarField> = sol.slices.iter().map(|s| s.u.clone()).collect();
    let fields: Vec<FaceField> = sol.slices.iter().map(|s| s.z.clone()).collect();
    let checks = flow_checks(
        &grid,
        tau,
        &states,
        &fields,
        &problem.boundary,
        &cfg.verify,
        cfg.seed,
        &cfg.solver,
    )?;

    let mut csv = String::from(
        "index,time,tv_value,l2_step,energy_excess,maximal_pairing_residual,div_residual,z_linf,variational_violation,dual_norm_of_dt\n",
    );
    for (row, s) in sol.series.iter().zip(&sol.slices) {
        let c = &s.certificate;
        csv.push_str(&format!(
            "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}\n",
            row.index,
            row.time,
            row.tv_value,
            row.l2_step,
            row.energy_excess,
            c.maximal_pairing_residual,
            c.div_residual,
            c.z_linf,
            c.variational_violations,
            c.dual_norm_of_dt
        ));
    }
    w.bytes("series.csv", csv.as_bytes())?;
    w.json(
        "certificates.json",
        &json!({
            "command": cfg.command,
            "problem": {
                "grid": grid.spec(),
                "tau": tau,
                "horizon": horizon,
                "initial": cfg.initial.as_ref().map(|d| d.to_json()),
                "boundary": bspec.to_json(),
            },
            "seed": cfg.seed,
            "comparisons": cfg.verify.comparisons,
            "slices": sol.certificates(),
        }),
    )?;
    w.json(
        "solution.json",
        &SolutionFile::Flow(FlowSolutionFile {
            grid: grid.spec(),
            tau,
            seed: cfg.seed,
            verify: cfg.verify,
            boundary: problem.boundary.clone(),
            states,
            fields,
        }),
    )?;
    w.field("u_final", &grid, sol.final_state())?;
    Ok(checks)
}

fn run_sweep(cfg: &RunConfig, w: &mut Writer) -> Result<Vec<Check>, HarnessError> {
    let grid = cfg.grid()?;
    let f = load(cfg, &grid, &cfg.source, 0.0)?;
    let u0 = load(cfg, &grid, &cfg.boundary, 0.0)?;
    let schedule = cfg.schedule.as_ref().expect("validated");
    let rep = mu_sweep(&grid, &f, &u0, schedule, &cfg.solver)?;
    let tol = cfg.solver.tolerance;
    let f_linf = f.interior_linf(&grid);

    let mut checks = Vec::new();
    for e in &rep.entries {
        let tag = format!("mu = {}", e.mu);
        let c = &e.certificate;
        checks.push(Check::le("value_bound", e.value_deviation, e.value_bound * (1.0 + 1e-12) + 1e-15).with_detail(tag.clone()));
        checks.push(
            Check::le(
                "envelope",
                rep.limit.primal_value - e.tv_part,
                e.mu * grid.domain_volume() + tol * rep.limit.scale(),
            )
            .with_detail(tag.clone()),
        );
        checks.push(Check::le("coercivity", e.scaled_l2, rep.coercivity_bound).with_detail(tag.clone()));
        checks.push(
            Check::le("divergence", e.div_residual, tol * (1.0 + (1.0 - e.mu) * f_linf + e.mu * e.u_linf))
                .with_detail(tag.clone()),
        );
        checks.push(Check::le("weak_duality", -c.gap, 1e-8 * c.scale()).with_detail(tag.clone()));
        checks.push(Check::le("z_bound", c.feasibility_excess, 1e-9).with_detail(tag));
    }
    let slack = tol * rep.limit.scale();
    checks.push(Check::flag("dual_trend", rep.dual_trend_monotone(slack)));

    let mut csv = String::from("mu,value,tv_part,dual_value,div_residual,scaled_l2,value_deviation,value_bound,dual_deviation\n");
    for e in &rep.entries {
        csv.push_str(&format!(
            "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}\n",
            e.mu, e.value, e.tv_part, e.dual_value, e.div_residual, e.scaled_l2, e.value_deviation, e.value_bound, e.dual_deviation
        ));
    }
    w.bytes("sweep.csv", csv.as_bytes())?;
    w.json(
        "sweep.json",
        &json!({
            "command": cfg.command,
            "problem": {
                "grid": grid.spec(),
                "source": cfg.source.as_ref().map(|d| d.to_json()),
                "boundary": cfg.boundary.as_ref().map(|d| d.to_json()),
                "schedule": schedule,
            },
            "seed": cfg.seed,
            "report": rep,
        }),
    )?;
    Ok(checks)
}

fn run_feasibility(cfg: &RunConfig, w: &mut Writer) -> Result<Vec<Check>, HarnessError> {
    let grid = cfg.grid()?;
    let g = load(cfg, &grid, &cfg.source, 0.0)?;
    let rep = dual_feasibility(&grid, &g, &cfg.solver)?;
    let d = divergence(&grid, &rep.witness)?;
    let defect = grid
        .interior_cells()
        .iter()
        .map(|&k| (d.values()[k] - g.values()[k]).abs())
        .fold(0.0, f64::max);
    let checks = vec![
        Check::le("witness_divergence", defect, 1e-9 * (1.0 + g.interior_linf(&grid))),
        Check::le("bracket", rep.lower_bound - rep.upper_bound, 1e-12),
    ];
    w.json(
        "feasibility.json",
        &json!({
            "command": cfg.command,
            "problem": { "grid": grid.spec(), "source": cfg.source.as_ref().map(|d| d.to_json()) },
            "feasible": rep.feasible,
            "lower_bound": rep.lower_bound,
            "upper_bound": rep.upper_bound,
            "iterations": rep.iterations,
            "witness": rep.witness,
            "seed": cfg.seed,
        }),
    )?;
    Ok(checks)
}

fn run_verify(cfg: &RunConfig) -> Result<Vec<Check>, HarnessError> {
    let path = cfg.resolve(cfg.solution.as_ref().expect("validated"));
    let text = fs::read_to_string(&path).map_err(|e| HarnessError::Parse {
        path: path.display().to_string(),
        line: None,
        message: e.to_string(),
    })?;
    let file: SolutionFile = serde_json::from_str(&text).map_err(|e| HarnessError::Parse {
        path: path.display().to_string(),
        line: Some(e.line()),
        message: e.to_string(),
    })?;
    match file {
        SolutionFile::Elliptic(s) => {
            let grid = Grid::new(&s.grid)?;
            for f in [&s.source, &s.boundary, &s.u] {
                f.check(&grid)?;
            }
            s.z.check(&grid)?;
            if !s.u.collar_matches(&s.boundary, &grid, 0.0) {
                return Err(Error::CollarMismatch { index: 0 }.into());
            }
            let params = EnergyParams::new(&grid, s.mu, s.lambda, s.source, s.boundary)?;
            elliptic_checks(&grid, &params, &s.u, &s.z, s.tolerance, s.maximal_pairing)
        }
        SolutionFile::Flow(s) => {
            let grid = Grid::new(&s.grid)?;
            let mut settings = s.verify;
            if cfg.verify != VerifySettings::default() {
                settings = cfg.verify;
            }
            flow_checks(&grid, s.tau, &s.states, &s.fields, &s.boundary, &settings, s.seed, &cfg.solver)
        }
    }
}
