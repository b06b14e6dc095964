use serde::{Deserialize, Serialize};

use crate::domain::{divergence, extend_with_boundary, gradient, FaceField, Grid, ScalarField};
use crate::energy::{psi, EnergyParams};
use crate::error::Result;

/// Primal and dual values of one elliptic solve.
///
/// For λ > 0 the dual value is the Lagrangian dual
/// Σ z·∇ū₀ + μ Σ √(1 − |z|²) + Σ_Ω (g·u₀ − g²/(2λ)) with g = div z − f, which
/// never exceeds the primal value for any z in the unit ball. For λ = 0 the
/// last sum is dropped and the constraint div z = f is reported through
/// `div_residual_linf`. All sums carry the h^d weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualityCertificate {
    pub primal_value: f64,
    pub dual_value: f64,
    pub gap: f64,
    /// ‖div z − λu − f‖∞ on Ω.
    pub div_residual_linf: f64,
    pub z_linf: f64,
    /// max(0, ‖z‖∞ − 1)
    pub feasibility_excess: f64,
    /// For μ > 0: max over cell groups of |z − ∇ū/√(μ² + |∇ū|²)|; zero for μ = 0.
    pub optimality_residual: f64,
    /// Σ z·∇ū₀ + λ/2 Σ_Ω u₀² + μ Σ √(1 − |z|²), an upper bound for the
    /// primal value at the exact minimizer.
    pub upper_estimate: f64,
    pub iterations: usize,
}

impl DualityCertificate {
    /// Scale used for relative tolerances on the gap.
    pub fn scale(&self) -> f64 {
        1.0 + self.primal_value.abs()
    }
}

/// Evaluates the certificate of a candidate pair (u, z).
pub fn certificate(
    grid: &Grid,
    params: &EnergyParams,
    u: &ScalarField,
    z: &FaceField,
    iterations: usize,
) -> Result<DualityCertificate> {
    let vol = grid.cell_volume();
    let (mu, lambda) = (params.mu, params.lambda);
    let primal_value = psi(grid, u, params)?;

    let grad_u0 = gradient(grid, &params.boundary)?;
    let ext = extend_with_boundary(grid, u, &params.boundary)?;
    let grad_u = gradient(grid, &ext)?;
    let div = divergence(grid, z)?;

    let mut linear = 0.0;
    for (a, b) in z.values().iter().zip(grad_u0.values()) {
        linear += a * b;
    }
    let mut slack = 0.0;
    let mut z_linf: f64 = 0.0;
    let mut optimality_residual: f64 = 0.0;
    for g in grid.groups() {
        let n = grid.group_norm(g, z.values());
        z_linf = z_linf.max(n);
        if g.is_boundary() {
            continue;
        }
        let c = n.min(1.0);
        slack += ((1.0 - c) * (1.0 + c)).sqrt();
        if mu > 0.0 {
            let s = mu.hypot(grid.group_norm(g, grad_u.values()));
            let dev = g
                .faces()
                .iter()
                .map(|&f| (z.values()[f] - grad_u.values()[f] / s).powi(2))
                .sum::<f64>()
                .sqrt();
            optimality_residual = optimality_residual.max(dev);
        }
    }

    let (f, u0, uv, d) = (
        params.source.values(),
        params.boundary.values(),
        u.values(),
        div.values(),
    );
    let mut zero_order = 0.0;
    let mut half_u0_sq = 0.0;
    let mut div_residual: f64 = 0.0;
    for &k in grid.interior_cells() {
        let g = d[k] - f[k];
        if lambda > 0.0 {
            zero_order += g * u0[k] - g * g / (2.0 * lambda);
        }
        half_u0_sq += 0.5 * u0[k] * u0[k];
        div_residual = div_residual.max((g - lambda * uv[k]).abs());
    }

    let dual_value = (linear + mu * slack + zero_order) * vol;
    let upper_estimate = (linear + lambda * half_u0_sq + mu * slack) * vol;
    Ok(DualityCertificate {
        primal_value,
        dual_value,
        gap: primal_value - dual_value,
        div_residual_linf: div_residual,
        z_linf,
        feasibility_excess: (z_linf - 1.0).max(0.0),
        optimality_residual,
        upper_estimate,
        iterations,
    })
}
