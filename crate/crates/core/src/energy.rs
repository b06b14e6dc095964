//! Total variation, the area functional and the composite objective Ψ.
//!
//! All functionals act on the extension ū of u by the boundary datum, so
//! the jump across ∂Ω is part of the total variation. Cell groups carry the
//! regularized density √(μ² + |∇ū|²); faces on ∂Ω always enter with the
//! plain weight |jump|.

use crate::domain::{extend_with_boundary, Grid, ScalarField};
use crate::error::{Error, Result};

/// Tolerance on |z| ≤ 1 for pointwise dual vectors.
pub const BALL_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyParams {
    pub mu: f64,
    pub lambda: f64,
    /// Source term f; only Ω values are used.
    pub source: ScalarField,
    /// Datum u₀ on Ω ∪ collar.
    pub boundary: ScalarField,
}

impl EnergyParams {
    pub fn new(grid: &Grid, mu: f64, lambda: f64, source: ScalarField, boundary: ScalarField) -> Result<Self> {
        if !(mu.is_finite() && mu >= 0.0) {
            return Err(Error::param("mu", format!("must be finite and ≥ 0, got {mu}")));
        }
        if !lambda.is_finite() {
            return Err(Error::param("lambda", "must be finite"));
        }
        source.check(grid)?;
        boundary.check(grid)?;
        Ok(EnergyParams {
            mu,
            lambda,
            source,
            boundary,
        })
    }

    /// Parameters of Ψ_μ used in the μ ↓ 0 construction: λ = μ and f scaled by (1 − μ).
    pub fn regularized(grid: &Grid, mu: f64, source: &ScalarField, boundary: ScalarField) -> Result<Self> {
        Self::new(grid, mu, mu, source.scaled(1.0 - mu), boundary)
    }
}

/// Σ over groups of the density, without the h^d factor.
pub(crate) fn grouped_density(grid: &Grid, grad: &[f64], mu: f64) -> f64 {
    grid.groups()
        .iter()
        .map(|g| {
            let n = grid.group_norm(g, grad);
            if g.is_boundary() || mu == 0.0 {
                n
            } else {
                mu.hypot(n)
            }
        })
        .sum()
}

fn extended_gradient(grid: &Grid, u: &ScalarField, boundary: &ScalarField) -> Result<Vec<f64>> {
    let ext = extend_with_boundary(grid, u, boundary)?;
    let mut grad = vec![0.0; grid.face_count()];
    grid.gradient_into(ext.values(), &mut grad);
    Ok(grad)
}

/// ‖Dū‖(Ω̄) for ū = u on Ω, u₀ on the collar.
pub fn total_variation(grid: &Grid, u: &ScalarField, boundary: &ScalarField) -> Result<f64> {
    let grad = extended_gradient(grid, u, boundary)?;
    Ok(grouped_density(grid, &grad, 0.0) * grid.cell_volume())
}

/// A^(μ)(u): regularized density on cell groups plus the unregularized
/// jump term on ∂Ω.
pub fn area_functional(grid: &Grid, u: &ScalarField, boundary: &ScalarField, mu: f64) -> Result<f64> {
    if !(mu.is_finite() && mu >= 0.0) {
        return Err(Error::param("mu", format!("must be finite and ≥ 0, got {mu}")));
    }
    let grad = extended_gradient(grid, u, boundary)?;
    Ok(grouped_density(grid, &grad, mu) * grid.cell_volume())
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn check_ball(z: &[f64]) -> Result<f64> {
    let n = norm(z);
    if !(n <= 1.0 + BALL_SLACK) {
        return Err(Error::OutsideUnitBall(n));
    }
    Ok(n)
}

/// Convex conjugate of v ↦ √(μ² + |v|²) on the unit ball: −μ√(1 − |z|²).
pub fn conjugate_density(z: &[f64], mu: f64) -> Result<f64> {
    let n = check_ball(z)?;
    let n = n.min(1.0);
    Ok(-mu * ((1.0 - n) * (1.0 + n)).sqrt())
}

/// √(μ² + |v|²) − μ√(1 − |z|²) − |z·v|, nonnegative, zero exactly when
/// z = v / √(μ² + |v|²).
pub fn fenchel_gap(z: &[f64], v: &[f64], mu: f64) -> Result<f64> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::param("mu", format!("must be positive, got {mu}")));
    }
    if z.len() != v.len() {
        return Err(Error::SizeMismatch {
            expected: z.len(),
            found: v.len(),
        });
    }
    let conj = conjugate_density(z, mu)?;
    let dot: f64 = z.iter().zip(v).map(|(a, b)| a * b).sum();
    Ok(mu.hypot(norm(v)) + conj - dot.abs())
}

/// Ψ(u) = A^(μ)(u) + Σ_Ω (λ/2·u² + f·(u − u₀))·h^d.
pub fn psi(grid: &Grid, u: &ScalarField, params: &EnergyParams) -> Result<f64> {
    let area = area_functional(grid, u, &params.boundary, params.mu)?;
    let (uv, f, u0) = (u.values(), params.source.values(), params.boundary.values());
    let zero_order: f64 = grid
        .interior_cells()
        .iter()
        .map(|&k| 0.5 * params.lambda * uv[k] * uv[k] + f[k] * (uv[k] - u0[k]))
        .sum();
    Ok(area + zero_order * grid.cell_volume())
}
