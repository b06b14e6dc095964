use serde::{Deserialize, Serialize};

use super::{minimize_psi, solve_tv_problem, DualityCertificate, EllipticSolution, SolverConfig};
use crate::domain::{gradient, Grid, ScalarField};
use crate::energy::{area_functional, total_variation, EnergyParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub mu: f64,
    /// Optimal value of Ψ_μ with λ = μ and source (1 − μ)f.
    pub value: f64,
    /// TV(u_μ) + Σ f·(u_μ − u₀)·h^d, the limit objective at u_μ.
    pub tv_part: f64,
    /// Σ z_μ·∇u₀·h^d
    pub dual_value: f64,
    /// ‖div z_μ − μu_μ − (1 − μ)f‖∞
    pub div_residual: f64,
    /// √μ·‖u_μ‖_{L²(Ω)}
    pub scaled_l2: f64,
    /// ‖u_μ‖∞ on Ω
    pub u_linf: f64,
    /// |value − value₀|
    pub value_deviation: f64,
    /// μ|Ω| + ½μ Σ u₀²·h^d
    pub value_bound: f64,
    /// |dual_value − dual₀|
    pub dual_deviation: f64,
    pub certificate: DualityCertificate,
}

impl SweepEntry {
    /// The bound is attained exactly for zero data, so rounding gets a
    /// relative allowance of a few ulps.
    pub fn within_bound(&self) -> bool {
        self.value_deviation <= self.value_bound * (1.0 + 1e-12) + 1e-15
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub entries: Vec<SweepEntry>,
    /// Certificate of the μ = 0 problem.
    pub limit: DualityCertificate,
    /// Σ z₀·∇u₀·h^d for the limit field.
    pub limit_dual: f64,
    /// √(2C) with C = A^(1)(u₀) + Σ u₀²·h^d + TV(u₀); bounds every √μ‖u_μ‖.
    pub coercivity_bound: f64,
}

impl SweepReport {
    /// True when consecutive entries move the dual value toward the limit.
    pub fn dual_trend_monotone(&self, slack: f64) -> bool {
        self.entries
            .windows(2)
            .all(|w| w[1].dual_deviation <= w[0].dual_deviation + slack)
    }
}

fn solve_entries(
    grid: &Grid,
    f: &ScalarField,
    u0: &ScalarField,
    schedule: &[f64],
    cfg: &SolverConfig,
) -> Result<Vec<EllipticSolution>> {
    let results: Vec<Result<EllipticSolution>> = std::thread::scope(|scope| {
        let handles: Vec<_> = schedule
            .iter()
            .map(|&mu| {
                scope.spawn(move || {
                    let params = EnergyParams::regularized(grid, mu, f, u0.clone())?;
                    minimize_psi(grid, &params, cfg)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    });
    results.into_iter().collect()
}

/// Solves Ψ_μ along a strictly decreasing schedule of positive μ (entries
/// run concurrently) and compares each against the μ = 0 problem.
pub fn mu_sweep(
    grid: &Grid,
    f: &ScalarField,
    u0: &ScalarField,
    schedule: &[f64],
    cfg: &SolverConfig,
) -> Result<SweepReport> {
    if schedule.is_empty() {
        return Err(Error::param("schedule", "must not be empty"));
    }
    if schedule.iter().any(|&m| !(m > 0.0 && m <= 1.0)) {
        return Err(Error::param("schedule", "entries must lie in (0, 1]"));
    }
    if schedule.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::param("schedule", "must be strictly decreasing"));
    }

    let limit = solve_tv_problem(grid, f, u0, cfg)?;
    let solutions = solve_entries(grid, f, u0, schedule, cfg)?;

    let vol = grid.cell_volume();
    let grad_u0 = gradient(grid, u0)?;
    let dual_of = |s: &EllipticSolution| s.z.dot(&grad_u0, grid);
    let limit_dual = dual_of(&limit);
    let value0 = limit.certificate.primal_value;
    let u0_sq: f64 = grid.interior_cells().iter().map(|&k| u0.values()[k].powi(2)).sum::<f64>() * vol;

    let mut entries = Vec::with_capacity(schedule.len());
    for (&mu, sol) in schedule.iter().zip(solutions) {
        let tv = total_variation(grid, &sol.u, u0)?;
        let linear: f64 = grid
            .interior_cells()
            .iter()
            .map(|&k| f.values()[k] * (sol.u.values()[k] - u0.values()[k]))
            .sum::<f64>()
            * vol;
        let dual_value = dual_of(&sol);
        let value = sol.certificate.primal_value;
        entries.push(SweepEntry {
            mu,
            value,
            tv_part: tv + linear,
            dual_value,
            div_residual: sol.certificate.div_residual_linf,
            scaled_l2: mu.sqrt() * sol.u.interior_l2(grid),
            u_linf: sol.u.interior_linf(grid),
            value_deviation: (value - value0).abs(),
            value_bound: mu * grid.domain_volume() + 0.5 * mu * u0_sq,
            dual_deviation: (dual_value - limit_dual).abs(),
            certificate: sol.certificate,
        });
    }

    let c = area_functional(grid, u0, u0, 1.0)? + u0_sq + total_variation(grid, u0, u0)?;
    Ok(SweepReport {
        entries,
        limit: limit.certificate,
        limit_dual,
        coercivity_bound: (2.0 * c).sqrt(),
    })
}
