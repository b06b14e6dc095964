//! Implicit Euler for the total variation flow with Dirichlet data.
//!
//! Each step minimizes ‖Dv‖(Ω̄) + (1/2τ)Σ_Ω (v − u_prev)²·h^d over v equal
//! to the current boundary datum on the collar, which is Ψ with λ = 1/τ,
//! μ = 0 and f = −u_prev/τ. The dual field of the step satisfies
//! div z = (u − u_prev)/τ, so every slice carries both a variational and a
//! weak-solution certificate.

mod verify;

pub use verify::{
    comparison_family, verify_trajectory, verify_variational, verify_weak, TrajectoryReport, VariationalReport,
    WeakReport,
};

use serde::{Deserialize, Serialize};

use crate::anzellotti::pairing;
use crate::domain::{extend_with_boundary, FaceField, Grid, ScalarField};
use crate::elliptic::{dual_feasibility, minimize_psi, DualityCertificate, SolverConfig};
use crate::energy::{total_variation, EnergyParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FlowProblem {
    pub grid: Grid,
    /// u(0) on Ω ∪ collar.
    pub initial: ScalarField,
    /// Boundary datum at every time node t_k = kτ, k = 0..=K.
    pub boundary: Vec<ScalarField>,
    pub tau: f64,
    pub horizon: f64,
}

impl FlowProblem {
    /// Flow whose boundary datum is the collar of the initial datum for all
    /// times.
    pub fn time_independent(grid: Grid, initial: ScalarField, tau: f64, horizon: f64) -> Result<Self> {
        let steps = step_count(tau, horizon)?;
        let boundary = vec![initial.clone(); steps + 1];
        Self::new(grid, initial, boundary, tau, horizon)
    }

    /// Flow with boundary data sampled by `datum(k)` at each node.
    pub fn with_boundary(
        grid: Grid,
        initial: ScalarField,
        tau: f64,
        horizon: f64,
        mut datum: impl FnMut(usize, f64) -> Result<ScalarField>,
    ) -> Result<Self> {
        let steps = step_count(tau, horizon)?;
        let boundary = (0..=steps)
            .map(|k| datum(k, k as f64 * tau))
            .collect::<Result<Vec<_>>>()?;
        Self::new(grid, initial, boundary, tau, horizon)
    }

    pub fn new(grid: Grid, initial: ScalarField, boundary: Vec<ScalarField>, tau: f64, horizon: f64) -> Result<Self> {
        let steps = step_count(tau, horizon)?;
        if boundary.len() != steps + 1 {
            return Err(Error::param(
                "boundary",
                format!("need {} time nodes, got {}", steps + 1, boundary.len()),
            ));
        }
        initial.check(&grid)?;
        for b in &boundary {
            b.check(&grid)?;
        }
        if !initial.collar_matches(&boundary[0], &grid, 0.0) {
            return Err(Error::param("initial", "must agree with the boundary datum at t = 0 on the collar"));
        }
        Ok(FlowProblem {
            grid,
            initial,
            boundary,
            tau,
            horizon,
        })
    }

    /// K = round(T/τ)
    pub fn steps(&self) -> usize {
        self.boundary.len() - 1
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.tau
    }

    pub fn is_time_independent(&self) -> bool {
        self.boundary
            .iter()
            .all(|b| b.collar_matches(&self.boundary[0], &self.grid, 0.0))
    }
}

fn step_count(tau: f64, horizon: f64) -> Result<usize> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::param("tau", format!("must be positive, got {tau}")));
    }
    if !(horizon >= tau && horizon.is_finite()) {
        return Err(Error::param("horizon", format!("must be at least tau, got {horizon}")));
    }
    Ok((horizon / tau).round() as usize)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceCertificate {
    pub index: usize,
    pub time: f64,
    /// ‖Du^k‖(Ω̄)
    pub tv_value: f64,
    /// (u^k − u^{k−1})/τ
    pub dt_field: ScalarField,
    /// ‖u^k − u^{k−1}‖_{L²(Ω)}
    pub l2_step: f64,
    /// |(z^k, Du^k)_{u₀} − ‖Du^k‖(Ω̄)|
    pub maximal_pairing_residual: f64,
    /// ‖div z^k − dt_field‖∞
    pub div_residual: f64,
    pub z_linf: f64,
    /// Worst signed violation of the slicewise variational inequality over
    /// the comparison family (≤ 0 when it holds).
    pub variational_violations: f64,
    pub comparisons: usize,
    pub w_minus_one_inf_feasible: bool,
    /// Smallest ‖z‖∞ found with div z = dt_field.
    pub dual_norm_of_dt: f64,
    pub solver: DualityCertificate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Slice {
    pub u: ScalarField,
    pub z: FaceField,
    pub certificate: SliceCertificate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DissipationRow {
    pub index: usize,
    pub time: f64,
    pub tv_value: f64,
    pub l2_step: f64,
    /// ‖Du^k‖ + (1/τ)‖u^k − u^{k−1}‖² − ‖Du^{k−1}‖; nonpositive for
    /// time-independent data.
    pub energy_excess: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowSolution {
    /// Slices k = 0..=K; slice 0 holds the initial datum.
    pub slices: Vec<Slice>,
    pub series: Vec<DissipationRow>,
}

impl FlowSolution {
    pub fn final_state(&self) -> &ScalarField {
        &self.slices.last().expect("flow has at least one slice").u
    }

    pub fn certificates(&self) -> Vec<&SliceCertificate> {
        self.slices.iter().map(|s| &s.certificate).collect()
    }
}

/// Options for the comparison family attached to every slice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyOptions {
    /// Random comparisons per slice, on top of the three fixed ones.
    pub comparisons: usize,
    pub seed: u64,
    /// Verifier tolerance relative to 1 + ‖Du‖(Ω̄).
    pub tolerance: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            comparisons: 100,
            seed: 0,
            tolerance: 1e-6,
        }
    }
}

/// Gap target for one step. Ψ of a step carries terms of size
/// ‖u_prev‖²/τ that cancel at the optimum and would dominate a gap
/// tolerance relative to Ψ; the step is solved relative to the size of the
/// TV term instead.
fn step_config(grid: &Grid, u_prev: &ScalarField, boundary: &ScalarField, tau: f64, cfg: &SolverConfig) -> Result<SolverConfig> {
    let tv = total_variation(grid, u_prev, boundary)?;
    let (p, b) = (u_prev.interior_l2(grid), boundary.interior_l2(grid));
    let quad = (0.5 * p * p + p * b) / tau;
    let mut c = cfg.clone();
    c.tolerance = cfg.tolerance * (1.0 + tv) / (1.0 + tv + quad);
    Ok(c)
}

/// One implicit Euler step from `u_prev` with the boundary datum of the new
/// time node. The variational check uses the deterministic comparisons
/// (the slice, the previous slice, the datum); [`solve_flow`] adds the
/// seeded random family.
pub fn step(grid: &Grid, u_prev: &ScalarField, boundary: &ScalarField, tau: f64, cfg: &SolverConfig) -> Result<Slice> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::param("tau", format!("must be positive, got {tau}")));
    }
    let source = u_prev.scaled(-1.0 / tau);
    let params = EnergyParams::new(grid, 0.0, 1.0 / tau, source, boundary.clone())?;
    let sol = minimize_psi(grid, &params, &step_config(grid, u_prev, boundary, tau, cfg)?)?;
    certify(grid, sol.u, sol.z, sol.certificate, u_prev, boundary, tau, cfg, &[])
}

#[allow(clippy::too_many_arguments)]
fn certify(
    grid: &Grid,
    u: ScalarField,
    z: FaceField,
    solver: DualityCertificate,
    u_prev: &ScalarField,
    boundary: &ScalarField,
    tau: f64,
    cfg: &SolverConfig,
    extra: &[ScalarField],
) -> Result<Slice> {
    let dt = dt_field(grid, &u, u_prev, tau);
    let tv_value = total_variation(grid, &u, boundary)?;
    let pair = pairing(grid, &z, &u, boundary)?;
    let div = crate::domain::divergence(grid, &z)?;
    let div_residual = grid
        .interior_cells()
        .iter()
        .map(|&k| (div.values()[k] - dt.values()[k]).abs())
        .fold(0.0, f64::max);

    let mut family = vec![
        u.clone(),
        extend_with_boundary(grid, u_prev, boundary)?,
        boundary.clone(),
    ];
    family.extend_from_slice(extra);
    let var = verify_variational(grid, &u, u_prev, boundary, tau, &family, 0.0)?;
    let feas = dual_feasibility(grid, &dt, cfg)?;

    Ok(Slice {
        certificate: SliceCertificate {
            index: 0,
            time: 0.0,
            tv_value,
            l2_step: u.sub(u_prev).interior_l2(grid),
            dt_field: dt,
            maximal_pairing_residual: (pair.value - tv_value).abs(),
            div_residual,
            z_linf: z.linf(grid),
            variational_violations: var.worst_violation,
            comparisons: family.len(),
            w_minus_one_inf_feasible: feas.feasible,
            dual_norm_of_dt: feas.upper_bound,
            solver,
        },
        u,
        z,
    })
}

pub(crate) fn dt_field(grid: &Grid, u: &ScalarField, u_prev: &ScalarField, tau: f64) -> ScalarField {
    let mut dt = ScalarField::zeros(grid);
    for &k in grid.interior_cells() {
        dt.values_mut()[k] = (u.values()[k] - u_prev.values()[k]) / tau;
    }
    dt
}

fn initial_slice(problem: &FlowProblem, cfg: &SolverConfig) -> Result<Slice> {
    let grid = &problem.grid;
    let u = problem.initial.clone();
    let tv_value = total_variation(grid, &u, &problem.boundary[0])?;
    let z = FaceField::zeros(grid);
    let feas = dual_feasibility(grid, &ScalarField::zeros(grid), cfg)?;
    let solver = DualityCertificate {
        primal_value: tv_value,
        dual_value: tv_value,
        gap: 0.0,
        div_residual_linf: 0.0,
        z_linf: 0.0,
        feasibility_excess: 0.0,
        optimality_residual: 0.0,
        upper_estimate: tv_value,
        iterations: 0,
    };
    Ok(Slice {
        certificate: SliceCertificate {
            index: 0,
            time: 0.0,
            tv_value,
            dt_field: ScalarField::zeros(grid),
            l2_step: 0.0,
            maximal_pairing_residual: 0.0,
            div_residual: 0.0,
            z_linf: 0.0,
            variational_violations: 0.0,
            comparisons: 0,
            w_minus_one_inf_feasible: feas.feasible,
            dual_norm_of_dt: 0.0,
            solver,
        },
        u,
        z,
    })
}

/// Runs the K steps of the problem. Slice 0 is the initial datum, which
/// has no dual field; its certificate is trivially zero. Step errors carry
/// the failing time index.
pub fn solve_flow(problem: &FlowProblem, cfg: &SolverConfig, opts: &VerifyOptions) -> Result<FlowSolution> {
    let grid = &problem.grid;
    let tau = problem.tau;
    let mut slices = vec![initial_slice(problem, cfg)?];
    let mut series = vec![DissipationRow {
        index: 0,
        time: 0.0,
        tv_value: slices[0].certificate.tv_value,
        l2_step: 0.0,
        energy_excess: 0.0,
    }];

    for k in 1..=problem.steps() {
        let wrap = |e: Error| Error::Step {
            step: k,
            source: Box::new(e),
        };
        let boundary = &problem.boundary[k];
        let prev = &slices[k - 1];
        let params = EnergyParams::new(grid, 0.0, 1.0 / tau, prev.u.scaled(-1.0 / tau), boundary.clone()).map_err(wrap)?;
        let step_cfg = step_config(grid, &prev.u, boundary, tau, cfg).map_err(wrap)?;
        let sol = minimize_psi(grid, &params, &step_cfg).map_err(wrap)?;
        let random = comparison_family(grid, &sol.u, boundary, opts.comparisons, opts.seed, k).map_err(wrap)?;
        let mut slice = certify(grid, sol.u, sol.z, sol.certificate, &prev.u, boundary, tau, cfg, &random).map_err(wrap)?;
        slice.certificate.index = k;
        slice.certificate.time = problem.time(k);

        let prev_tv = total_variation(grid, &prev.u, boundary).map_err(wrap)?;
        let c = &slice.certificate;
        series.push(DissipationRow {
            index: k,
            time: c.time,
            tv_value: c.tv_value,
            l2_step: c.l2_step,
            energy_excess: c.tv_value + c.l2_step * c.l2_step / tau - prev_tv,
        });
        slices.push(slice);
    }
    Ok(FlowSolution { slices, series })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialAttainment {
    /// ‖u^k − u(0)‖_{L²(Ω)} for the first slices k = 1, 2, …
    pub distances: Vec<f64>,
    /// True when the distances never exceed the dissipation bound
    /// √(k·τ·TV(u(0))) obtained by summing the energy inequality.
    pub within_bound: bool,
}

/// Distance of the first few slices from the initial datum.
pub fn check_initial_attainment(flow: &FlowSolution, problem: &FlowProblem) -> Result<InitialAttainment> {
    let grid = &problem.grid;
    let u0 = &flow.slices[0].u;
    let tv0 = flow.slices[0].certificate.tv_value;
    let count = flow.slices.len().saturating_sub(1).min(5);
    let distances: Vec<f64> = flow.slices[1..=count]
        .iter()
        .map(|s| s.u.sub(u0).interior_l2(grid))
        .collect();
    let within_bound = problem.is_time_independent()
        && distances
            .iter()
            .enumerate()
            .all(|(i, d)| *d <= ((i + 1) as f64 * problem.tau * tv0).sqrt() * (1.0 + 1e-9) + 1e-12);
    Ok(InitialAttainment {
        distances,
        within_bound: within_bound || !problem.is_time_independent(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementStudy {
    /// (τ_j, ‖u(τ_j) − u(0)‖) for τ, τ/2, τ/4, …
    pub levels: Vec<(f64, f64)>,
    pub decreasing: bool,
}

/// One step from the initial datum at successively halved time steps, with
/// the boundary datum frozen at its t = 0 value.
pub fn initial_refinement(problem: &FlowProblem, cfg: &SolverConfig, levels: usize) -> Result<RefinementStudy> {
    let grid = &problem.grid;
    let mut out = Vec::with_capacity(levels);
    let mut tau = problem.tau;
    for _ in 0..levels {
        let s = step(grid, &problem.initial, &problem.boundary[0], tau, cfg)?;
        out.push((tau, s.u.sub(&problem.initial).interior_l2(grid)));
        tau *= 0.5;
    }
    let decreasing = out.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12);
    Ok(RefinementStudy { levels: out, decreasing })
}
