//! Discrete normal trace and Anzellotti pairing.
//!
//! The normal trace of a face field is its outward-signed value on the faces
//! of ∂Ω. With it the summation-by-parts identity
//!
//!   Σ_Ω w·div z·h^d + Σ_faces z·∇w·h^d = Σ_∂Ω [z,ν]·w_collar·h^(d−1)
//!
//! holds exactly, and the pairing (z, Dv)_{u₀}(Ω̄) reduces to finite sums.
//! It is computed twice, from the distributional definition and from the
//! comparison identity against u₀, so sign conventions are cross-checked on
//! every call.

use crate::domain::{divergence, extend_with_boundary, gradient, FaceField, Grid, ScalarField};
use crate::energy::{area_functional, BALL_SLACK};
use crate::error::{Error, Result};

/// [z,ν] on each face of ∂Ω, in the order of [`Grid::boundary_faces`].
pub fn normal_trace(grid: &Grid, z: &FaceField) -> Result<Vec<f64>> {
    z.check(grid)?;
    Ok(grid
        .boundary_faces()
        .iter()
        .map(|b| b.sign * z.values()[b.face])
        .collect())
}

/// Both sides of the discrete Gauss–Green identity for one (w, z) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussGreen {
    pub volume_terms: f64,
    pub boundary_flux: f64,
    /// Sum of the absolute values of all summands, for relative residuals.
    pub magnitude: f64,
}

impl GaussGreen {
    pub fn residual(&self) -> f64 {
        (self.volume_terms - self.boundary_flux).abs()
    }

    pub fn relative_residual(&self) -> f64 {
        self.residual() / self.magnitude.max(f64::MIN_POSITIVE)
    }
}

pub fn gauss_green(grid: &Grid, w: &ScalarField, z: &FaceField) -> Result<GaussGreen> {
    let div = divergence(grid, z)?;
    let grad = gradient(grid, w)?;
    let vol = grid.cell_volume();
    let mut volume_terms = 0.0;
    let mut magnitude = 0.0;
    for &k in grid.interior_cells() {
        let t = w.values()[k] * div.values()[k] * vol;
        volume_terms += t;
        magnitude += t.abs();
    }
    for (a, b) in z.values().iter().zip(grad.values()) {
        let t = a * b * vol;
        volume_terms += t;
        magnitude += t.abs();
    }
    let trace = normal_trace(grid, z)?;
    let mut boundary_flux = 0.0;
    for (t, b) in trace.iter().zip(grid.boundary_faces()) {
        let s = t * w.values()[b.outer] * grid.face_area();
        boundary_flux += s;
        magnitude += s.abs();
    }
    Ok(GaussGreen {
        volume_terms,
        boundary_flux,
        magnitude,
    })
}

/// (z, Dv)_{u₀}(Ω̄) computed two ways.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairingValue {
    pub value: f64,
    /// −Σ_Ω div z·v·h^d + Σ_∂Ω [z,ν]·u₀·h^(d−1)
    pub via_definition: f64,
    /// Σ z·∇ū₀·h^d + Σ_Ω div z·(u₀ − v)·h^d
    pub via_identity: f64,
}

impl PairingValue {
    pub fn discrepancy(&self) -> f64 {
        (self.via_definition - self.via_identity).abs()
    }
}

/// Pairing of z with the gradient of v extended by u₀. Only the Ω values of
/// `v` are used.
pub fn pairing(grid: &Grid, z: &FaceField, v: &ScalarField, boundary: &ScalarField) -> Result<PairingValue> {
    v.check(grid)?;
    boundary.check(grid)?;
    let div = divergence(grid, z)?;
    let vol = grid.cell_volume();
    let (d, vv, u0) = (div.values(), v.values(), boundary.values());

    let trace = normal_trace(grid, z)?;
    let flux: f64 = trace
        .iter()
        .zip(grid.boundary_faces())
        .map(|(t, b)| t * u0[b.outer])
        .sum::<f64>()
        * grid.face_area();
    let via_definition = -grid.interior_cells().iter().map(|&k| d[k] * vv[k]).sum::<f64>() * vol + flux;

    let grad_u0 = gradient(grid, boundary)?;
    let via_identity = z.dot(&grad_u0, grid)
        + grid
            .interior_cells()
            .iter()
            .map(|&k| d[k] * (u0[k] - vv[k]))
            .sum::<f64>()
            * vol;

    Ok(PairingValue {
        value: via_definition,
        via_definition,
        via_identity,
    })
}

/// Σ z·∇ū·h^d with ū = v extended by u₀; equal to the pairing by
/// summation by parts.
pub fn pairing_direct(grid: &Grid, z: &FaceField, v: &ScalarField, boundary: &ScalarField) -> Result<f64> {
    let ext = extend_with_boundary(grid, v, boundary)?;
    Ok(z.dot(&gradient(grid, &ext)?, grid))
}

/// Both sides of |(z, Du)_{u₀}(Ω̄)| ≤ A^(μ)(u) − μ Σ_Ω √(1 − |z|²)·h^d.
pub fn fenchel_pairing_bound(
    grid: &Grid,
    z: &FaceField,
    u: &ScalarField,
    boundary: &ScalarField,
    mu: f64,
) -> Result<(f64, f64)> {
    if !(mu > 0.0 && mu <= 1.0) {
        return Err(Error::param("mu", format!("must lie in (0, 1], got {mu}")));
    }
    let zinf = z.linf(grid);
    if zinf > 1.0 + BALL_SLACK {
        return Err(Error::OutsideUnitBall(zinf));
    }
    let lhs = pairing(grid, z, u, boundary)?.value.abs();
    let slack: f64 = grid
        .groups()
        .iter()
        .filter(|g| !g.is_boundary())
        .map(|g| {
            let n = grid.group_norm(g, z.values()).min(1.0);
            ((1.0 - n) * (1.0 + n)).sqrt()
        })
        .sum::<f64>()
        * grid.cell_volume();
    let rhs = area_functional(grid, u, boundary, mu)? - mu * slack;
    Ok((lhs, rhs))
}
