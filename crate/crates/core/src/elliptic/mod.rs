//! Minimization of Ψ(u) = A^(μ)(u) + Σ_Ω (λ/2·u² + f·(u − u₀))·h^d over
//! fields that agree with u₀ on the collar, with the dual field z and a
//! duality certificate.
//!
//! The solver works on the saddle form
//!
//!   min_u max_z ⟨z, ∇ū⟩ − F*(z) + G(u)
//!
//! where F* is −μ√(1 − |z|²) on every cell group (0 on boundary faces)
//! restricted to the unit ball and G holds the zero-order terms.

mod certificate;
mod feasibility;
mod pdhg;
mod sweep;

pub use certificate::{certificate, DualityCertificate};
pub use feasibility::{dual_feasibility, dual_feasibility_iterative, FeasibilityReport};
pub use sweep::{mu_sweep, SweepEntry, SweepReport};

use serde::{Deserialize, Serialize};

use crate::domain::{FaceField, Grid, ScalarField};
use crate::energy::EnergyParams;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub max_iterations: usize,
    /// Relative target for the duality gap and the divergence residual.
    pub tolerance: f64,
    /// Initial primal step; derived from the operator norm when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub primal_step: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dual_step: Option<f64>,
    /// Tolerance of the scalar root-find inside the dual proximal map.
    pub newton_tolerance: f64,
    /// Iterations between certificate evaluations.
    pub check_every: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iterations: 500_000,
            tolerance: 1e-9,
            primal_step: None,
            dual_step: None,
            newton_tolerance: 1e-14,
            check_every: 25,
        }
    }
}

impl SolverConfig {
    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn with_max_iterations(mut self, n: usize) -> Self {
        self.max_iterations = n;
        self
    }

    pub fn validate(&self, grid: &Grid) -> Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(Error::param("tolerance", "must be positive"));
        }
        if !(self.newton_tolerance > 0.0) {
            return Err(Error::param("newton_tolerance", "must be positive"));
        }
        if self.check_every == 0 {
            return Err(Error::param("check_every", "must be at least 1"));
        }
        for (name, step) in [("primal_step", self.primal_step), ("dual_step", self.dual_step)] {
            if let Some(s) = step {
                if !(s > 0.0 && s.is_finite()) {
                    return Err(Error::param(name, "must be positive"));
                }
            }
        }
        if let (Some(t), Some(s)) = (self.primal_step, self.dual_step) {
            let bound = 1.0 / gradient_norm_squared(grid);
            if t * s > bound {
                return Err(Error::param(
                    "primal_step",
                    format!("step product {} exceeds the stability bound {bound}", t * s),
                ));
            }
        }
        Ok(())
    }
}

/// Upper bound 4d/h² on the squared operator norm of the gradient.
pub fn gradient_norm_squared(grid: &Grid) -> f64 {
    4.0 * grid.dimension() as f64 / (grid.spacing() * grid.spacing())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EllipticSolution {
    /// Minimizer on Ω; equal to u₀ on the collar.
    pub u: ScalarField,
    pub z: FaceField,
    pub certificate: DualityCertificate,
}

/// Minimizes Ψ for any μ ≥ 0, λ ≥ 0. With λ = 0 the source must lie in the
/// dual unit ball, otherwise the objective is unbounded below.
pub fn minimize_psi(grid: &Grid, params: &EnergyParams, cfg: &SolverConfig) -> Result<EllipticSolution> {
    cfg.validate(grid)?;
    if !(params.lambda >= 0.0) {
        return Err(Error::param("lambda", format!("must be ≥ 0, got {}", params.lambda)));
    }
    params.source.check(grid)?;
    params.boundary.check(grid)?;
    if params.lambda == 0.0 {
        let report = dual_feasibility(grid, &params.source, cfg)?;
        if report.lower_bound > 1.0 + cfg.tolerance.max(1e-12) {
            return Err(Error::UnboundedBelow {
                norm: report.lower_bound,
            });
        }
    }
    pdhg::run(grid, params, cfg)
}

/// Minimizer of the area problem (μ > 0) with its dual field
/// z = ∇u / √(μ² + |∇u|²) and the certificate.
pub fn solve_area_problem(grid: &Grid, params: &EnergyParams, cfg: &SolverConfig) -> Result<EllipticSolution> {
    if !(params.mu > 0.0) {
        return Err(Error::param("mu", format!("must be positive, got {}", params.mu)));
    }
    minimize_psi(grid, params, cfg)
}

/// min TV(v) + Σ f·(v − u₀) over v = u₀ on the collar, together with a
/// maximizer z of Σ z·∇u₀ over {‖z‖∞ ≤ 1, div z = f}.
pub fn solve_tv_problem(
    grid: &Grid,
    source: &ScalarField,
    boundary: &ScalarField,
    cfg: &SolverConfig,
) -> Result<EllipticSolution> {
    let params = EnergyParams::new(grid, 0.0, 0.0, source.clone(), boundary.clone())?;
    minimize_psi(grid, &params, cfg)
}
