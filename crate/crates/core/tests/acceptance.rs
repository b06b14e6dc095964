//! Acceptance suite: one PASS/FAIL line per criterion, each at its stated
//! tolerance and runtime budget. Runs as a plain binary so the lines are
//! printed whether or not the criteria hold; any failure makes it exit 1.

mod common;

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use common::{brute_force_tv, proximal_gradient_oracle, taut_string_dirichlet_step, Problem1d};
use tvflow::anzellotti::{fenchel_pairing_bound, gauss_green, pairing, pairing_direct};
use tvflow::elliptic::{minimize_psi, SolverConfig};
use tvflow::energy::fenchel_gap;
use tvflow::harness::{parse_config_str, preset, problem_library, run_in, Check, RunReport, SolutionFile};
use tvflow::{EnergyParams, FaceField, Grid, GridSpec, ScalarField};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).expect("artifact exists")).expect("artifact is JSON")
}

fn check<'a>(report: &'a RunReport, name: &str) -> Vec<&'a Check> {
    report.checks.iter().filter(|c| c.name == name).collect()
}

fn all_pass(report: &RunReport, names: &[&str]) -> Result<(), String> {
    for name in names {
        let found = check(report, name);
        if found.is_empty() {
            return Err(format!("check `{name}` missing"));
        }
        if let Some(c) = found.iter().find(|c| !c.passed) {
            return Err(format!("`{name}` failed: {:e} > {:e}", c.value, c.limit));
        }
    }
    Ok(())
}

fn random_grid(rng: &mut ChaCha8Rng, max_1d: usize, max_2d: usize) -> Grid {
    let spec = if rng.gen_bool(0.5) {
        let n = rng.gen_range(1..=max_1d);
        GridSpec::line(n, 1.0 / n as f64)
    } else {
        let (nx, ny) = (rng.gen_range(1..=max_2d), rng.gen_range(1..=max_2d));
        GridSpec::rect(nx, ny, 1.0 / nx.max(ny) as f64)
    };
    Grid::new(&spec).unwrap()
}

fn random_cells(grid: &Grid, rng: &mut ChaCha8Rng, amp: f64) -> ScalarField {
    ScalarField::new(grid, (0..grid.cell_count()).map(|_| rng.gen_range(-amp..amp)).collect()).unwrap()
}

fn random_faces(grid: &Grid, rng: &mut ChaCha8Rng, amp: f64) -> FaceField {
    FaceField::new(grid, (0..grid.face_count()).map(|_| rng.gen_range(-amp..amp)).collect()).unwrap()
}

/// Fenchel inequality and its equality case.
fn fenchel_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst_gap, mut worst_eq) = (f64::INFINITY, 0.0f64);
    for _ in 0..10_000 {
        let d = rng.gen_range(1..=2);
        let mu = 2.0 * (1.0 - rng.gen::<f64>());
        let scale = 10f64.powi(rng.gen_range(-3..=2));
        let v: Vec<f64> = (0..d).map(|_| scale * rng.gen_range(-1.0..1.0)).collect();
        let mut z: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let zn = z.iter().map(|a| a * a).sum::<f64>().sqrt();
        let r = rng.gen::<f64>();
        if zn > 0.0 {
            z.iter_mut().for_each(|a| *a *= r / zn);
        }
        worst_gap = worst_gap.min(fenchel_gap(&z, &v, mu).unwrap());
        let s = (mu * mu + v.iter().map(|a| a * a).sum::<f64>()).sqrt();
        let opt: Vec<f64> = v.iter().map(|a| a / s).collect();
        worst_eq = worst_eq.max(fenchel_gap(&opt, &v, mu).unwrap().abs());
    }
    outcome(
        worst_gap >= -1e-12 && worst_eq <= 1e-10,
        format!("min gap {worst_gap:.2e} (≥ -1e-12), equality residual {worst_eq:.2e} (≤ 1e-10)"),
    )
}

/// Summation by parts on random 1D and 2D grids.
fn gauss_green_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let grid = random_grid(&mut rng, 64, 16);
        let w = random_cells(&grid, &mut rng, 1.0);
        let z = random_faces(&grid, &mut rng, 1.0);
        worst = worst.max(gauss_green(&grid, &w, &z).unwrap().relative_residual());
    }
    outcome(worst <= 1e-12, format!("worst relative residual {worst:.2e} (≤ 1e-12)"))
}

/// Pairing computed by definition, by the comparison identity and by
/// direct summation; the pairing bound by the regularized area.
fn pairing_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut worst_id, mut worst_direct, mut worst_bound) = (0.0f64, 0.0f64, f64::NEG_INFINITY);
    for _ in 0..1000 {
        let grid = random_grid(&mut rng, 32, 12);
        let mut z = random_faces(&grid, &mut rng, 1.0);
        let zl = z.linf(&grid);
        if zl > 1.0 {
            z = z.scaled(1.0 / zl);
        }
        let v = random_cells(&grid, &mut rng, 2.0);
        let u0 = random_cells(&grid, &mut rng, 2.0);
        let mu = 1.0 - rng.gen::<f64>();
        let p = pairing(&grid, &z, &v, &u0).unwrap();
        let scale = 1.0 + p.via_definition.abs().max(p.via_identity.abs());
        worst_id = worst_id.max(p.discrepancy() / scale);
        worst_direct = worst_direct.max((pairing_direct(&grid, &z, &v, &u0).unwrap() - p.value).abs() / scale);
        let (lhs, rhs) = fenchel_pairing_bound(&grid, &z, &v, &u0, mu).unwrap();
        worst_bound = worst_bound.max((lhs - rhs) / (1.0 + rhs.abs()));
    }
    outcome(
        worst_id <= 1e-10 && worst_direct <= 1e-10 && worst_bound <= 1e-10,
        format!(
            "identity {worst_id:.2e}, direct {worst_direct:.2e}, bound excess {worst_bound:.2e} (all ≤ 1e-10 relative)"
        ),
    )
}

/// Discrete duality on the linear-datum preset at three resolutions; the
/// reference value comes from enumeration on n = 8.
fn elliptic_duality() -> Outcome {
    let levels: Vec<f64> = (0..=4).map(|k| k as f64 / 4.0).collect();
    let reference = brute_force_tv(8, [0.0, 1.0], &levels);
    let mut lines = vec![format!("brute-force n=8 value {reference}")];
    let mut ok = (reference - 1.0).abs() < 1e-12;
    for n in [8usize, 16, 32] {
        let mut cfg = preset("duality-linear-1d").unwrap();
        cfg.grid = Some(GridSpec::line(n, 1.0 / n as f64));
        let dir = tempfile::tempdir().unwrap();
        let report = match run_in(&cfg, dir.path()) {
            Ok(r) => r,
            Err(e) => return outcome(false, format!("n={n}: {e}")),
        };
        let cert = read_json(&dir.path().join("certificate.json"));
        let f = |k: &str| cert[k].as_f64().unwrap();
        let primal = f("primal_value");
        let pass = f("gap").abs() <= 1e-6 * (1.0 + primal.abs())
            && f("div_residual_linf") <= 1e-6
            && f("z_linf") <= 1.0 + 1e-9
            && (primal - reference).abs() <= 1e-5
            && report.passed;
        ok &= pass;
        lines.push(format!(
            "n={n}: primal {primal:.9} dual {:.9} gap {:.1e} div {:.1e} |z| {:.6}",
            f("dual_value"),
            f("gap"),
            f("div_residual_linf"),
            f("z_linf")
        ));
    }
    outcome(ok, lines.join("; "))
}

fn field_1d(grid: &Grid, values: &[f64]) -> ScalarField {
    ScalarField::new(grid, values.to_vec()).unwrap()
}

/// Solver optimum against a multi-start proximal-gradient oracle.
fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cases = [(0.3, 0.0), (1.0, 0.5), (0.0, 0.5), (0.0, 1.0), (1.0, 1.0)];
    let mut worst = 0.0f64;
    let mut lines = Vec::new();
    for (idx, &(mu, lambda)) in cases.iter().enumerate() {
        let n = rng.gen_range(4..=8);
        let p = Problem1d::random(&mut rng, n, mu, lambda);
        let grid = Grid::new(&GridSpec::line(n, p.h)).unwrap();
        let mut f = vec![0.0; n + 2];
        f[1..=n].copy_from_slice(&p.f);
        let params = EnergyParams::new(&grid, mu, lambda, field_1d(&grid, &f), field_1d(&grid, &p.u0)).unwrap();
        let sol = match minimize_psi(&grid, &params, &SolverConfig::default()) {
            Ok(s) => s,
            Err(e) => return outcome(false, format!("case {idx}: {e}")),
        };
        let oracle = proximal_gradient_oracle(&p, 5, 100 + idx as u64);
        let err = (sol.certificate.primal_value - oracle.value).abs();
        worst = worst.max(err);
        lines.push(format!("(n={n}, mu={mu}, lambda={lambda}) err {err:.1e} spread {:.1e}", oracle.spread));
    }
    outcome(worst <= 1e-7, format!("worst |solver - oracle| {worst:.2e} (≤ 1e-7); {}", lines.join(", ")))
}

/// Regularization sweep on the default preset.
fn mu_sweep() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let report = match run_in(&preset("mu-sweep-default").unwrap(), dir.path()) {
        Ok(r) => r,
        Err(e) => return outcome(false, e.to_string()),
    };
    let sweep = read_json(&dir.path().join("sweep.json"));
    let entries = sweep["report"]["entries"].as_array().unwrap();
    let last = entries.last().unwrap();
    let last_dev = last["dual_deviation"].as_f64().unwrap();
    let bounds_ok = check(&report, "value_bound").iter().all(|c| c.passed) && check(&report, "value_bound").len() == 4;
    let trend_ok = check(&report, "dual_trend").iter().all(|c| c.passed);
    let devs: Vec<String> = entries
        .iter()
        .map(|e| format!("{:.1e}", e["dual_deviation"].as_f64().unwrap()))
        .collect();
    outcome(
        bounds_ok && trend_ok && last_dev <= 1e-4 && last["mu"].as_f64() == Some(0.004),
        format!(
            "value bound {} at all mu; dual deviations [{}], monotone {}, {last_dev:.2e} at mu=0.004 (≤ 1e-4)",
            if bounds_ok { "holds" } else { "violated" },
            devs.join(", "),
            trend_ok
        ),
    )
}

fn load_flow_solution(dir: &Path) -> tvflow::harness::FlowSolutionFile {
    match serde_json::from_str(&fs::read_to_string(dir.join("solution.json")).unwrap()).unwrap() {
        SolutionFile::Flow(s) => s,
        SolutionFile::Elliptic(_) => panic!("flow run wrote an elliptic solution"),
    }
}

/// Every plateau slice passes both notions of solution; a corrupted dual
/// field is rejected.
fn flow_equivalence() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let cfg = preset("plateau-decay-1d").unwrap();
    if cfg.verify.comparisons != 100 {
        return outcome(false, "preset does not use 100 comparisons");
    }
    let report = match run_in(&cfg, dir.path()) {
        Ok(r) => r,
        Err(e) => return outcome(false, e.to_string()),
    };
    if let Err(e) = all_pass(&report, &["z_bound", "divergence", "maximal_pairing", "weak_identity", "variational"]) {
        return outcome(false, e);
    }
    let mut sol = load_flow_solution(dir.path());
    let slices = sol.states.len() - 1;
    let k = 100;
    sol.fields[k] = sol.fields[k].scaled(1.5);
    let bad = tempfile::tempdir().unwrap();
    fs::write(bad.path().join("solution.json"), serde_json::to_string(&SolutionFile::Flow(sol)).unwrap()).unwrap();
    let verify = parse_config_str(r#"{"command": "verify", "solution": "solution.json"}"#, "control", bad.path()).unwrap();
    let control = run_in(&verify, bad.path()).unwrap();
    let rejected: Vec<&str> = control.failures().map(|c| c.name.as_str()).collect();
    outcome(
        report.passed && !control.passed && rejected.contains(&"maximal_pairing"),
        format!(
            "{slices} slices pass variational + weak (a-d) with 100 comparisons; corrupted z at slice {k} rejected by {rejected:?}"
        ),
    )
}

/// Plateau amplitude against the decay law and the taut-string chain.
fn plateau_decay() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let cfg = preset("plateau-decay-1d").unwrap();
    if let Err(e) = run_in(&cfg, dir.path()) {
        return outcome(false, e.to_string());
    }
    let sol = load_flow_solution(dir.path());
    let grid = Grid::new(&sol.grid).unwrap();
    let n = grid.shape()[0];
    let h = grid.spacing();
    let tau = sol.tau;
    let width = 0.5;
    let tol = (2.0 * h).max(4.0 * tau);
    let centre = grid.interior_index(n / 2, 0);

    let interior = |f: &ScalarField| f.interior(&grid);
    let mut oracle = interior(&sol.states[0]);
    let (mut worst_law, mut worst_oracle, mut worst_field) = (0.0f64, 0.0f64, 0.0f64);
    let mut extinct_at = None;
    for (k, state) in sol.states.iter().enumerate() {
        if k > 0 {
            oracle = taut_string_dirichlet_step(h, &oracle, 0.0, 0.0, tau);
        }
        let t = k as f64 * tau;
        let amp = state.values()[centre];
        let law = (1.0 - 2.0 * t / width).max(0.0);
        worst_law = worst_law.max((amp - law).abs());
        worst_oracle = worst_oracle.max((amp - oracle[n / 2]).abs());
        let u = interior(state);
        worst_field = worst_field.max(u.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
        if extinct_at.is_none() && state.interior_linf(&grid) <= 1e-6 {
            extinct_at = Some(t);
        }
    }
    let predicted = width / 2.0;
    let extinct_ok = extinct_at.is_some_and(|t| t <= 1.1 * predicted);
    outcome(
        worst_law <= tol && worst_oracle <= tol && extinct_ok,
        format!(
            "amplitude vs 1-2t/w {worst_law:.1e}, vs taut string {worst_oracle:.1e} (≤ {tol:.2e}); whole-field vs taut string {worst_field:.1e}; extinct at t={} (≤ {:.3})",
            extinct_at.map_or("never".to_string(), |t| format!("{t:.3}")),
            1.1 * predicted
        ),
    )
}

/// Energy inequality and dual-norm bound on every acceptance flow.
fn dissipation() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for name in ["plateau-decay-1d", "zero-flow-1d", "boundary-ramp-1d"] {
        let cfg = preset(name).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let report = match run_in(&cfg, dir.path()) {
            Ok(r) => r,
            Err(e) => return outcome(false, format!("{name}: {e}")),
        };
        let sol = load_flow_solution(dir.path());
        let time_independent = sol.boundary.windows(2).all(|w| w[0] == w[1]);
        let mut names = vec!["dual_norm_of_dt"];
        if time_independent {
            names.push("energy_dissipation");
        }
        match all_pass(&report, &names) {
            Ok(()) => lines.push(format!("{name}: {} ok", names.join(" + "))),
            Err(e) => {
                ok = false;
                lines.push(format!("{name}: {e}"));
            }
        }
    }
    outcome(ok, lines.join("; "))
}

/// Two runs of every preset with the same seed give identical JSON.
fn determinism() -> Outcome {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut compared = 0;
    for p in problem_library() {
        let cfg = preset(p.name).unwrap();
        let (da, db) = (a.path().join(p.name), b.path().join(p.name));
        let (ra, rb) = match (run_in(&cfg, &da), run_in(&cfg, &db)) {
            (Ok(ra), Ok(rb)) => (ra, rb),
            _ => return outcome(false, format!("{} did not run", p.name)),
        };
        if ra.files != rb.files {
            return outcome(false, format!("{}: different artifact lists", p.name));
        }
        for f in ra.files.iter().filter(|f| f.ends_with(".json")) {
            if fs::read(da.join(f)).unwrap() != fs::read(db.join(f)).unwrap() {
                return outcome(false, format!("{}/{f} differs between runs", p.name));
            }
            compared += 1;
        }
    }
    outcome(true, format!("{compared} JSON artifacts byte-identical across two runs"))
}

fn main() {
    type Criterion = (u32, &'static str, fn() -> Outcome, u64);
    let criteria: [Criterion; 10] = [
        (1, "Fenchel suite", fenchel_suite, 1),
        (2, "Gauss-Green adjointness", gauss_green_suite, 5),
        (3, "pairing identities", pairing_suite, 5),
        (4, "elliptic duality", elliptic_duality, 30),
        (5, "oracle equivalence", oracle_equivalence, 60),
        (6, "mu-sweep convergence", mu_sweep, 60),
        (7, "flow equivalence", flow_equivalence, 120),
        (8, "plateau decay law", plateau_decay, 120),
        (9, "dissipation and dual-norm bound", dissipation, 120),
        (10, "determinism", determinism, 600),
    ];
    let mut failed = 0;
    for (id, name, run, budget) in criteria {
        let start = Instant::now();
        let out = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(budget);
        let passed = out.passed && in_time;
        if !passed {
            failed += 1;
        }
        println!(
            "criterion {id:>2} {:<4} {name}: {} [{:.2} s of {budget} s{}]",
            if passed { "PASS" } else { "FAIL" },
            out.detail,
            elapsed.as_secs_f64(),
            if in_time { "" } else { ", over budget" }
        );
    }
    println!("acceptance: {}/10 criteria pass", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
