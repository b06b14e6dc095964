use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dt_field;
use crate::anzellotti::pairing;
use crate::domain::{divergence, FaceField, Grid, ScalarField};
use crate::energy::total_variation;
use crate::error::{Error, Result};

const AMPLITUDES: [f64; 4] = [1e-3, 1e-2, 1e-1, 1.0];

/// Random field on Ω made of up to four axis-aligned boxes with constant
/// values, zero on the collar.
fn random_boxes(grid: &Grid, rng: &mut ChaCha8Rng, scale: f64) -> Vec<f64> {
    let [nx, ny] = grid.shape();
    let mut psi = vec![0.0; grid.cell_count()];
    let amplitude = AMPLITUDES[rng.gen_range(0..AMPLITUDES.len())] * scale;
    for _ in 0..rng.gen_range(1..=4) {
        let (x0, x1) = ordered(rng.gen_range(0..nx), rng.gen_range(0..nx));
        let (y0, y1) = ordered(rng.gen_range(0..ny), rng.gen_range(0..ny));
        let level = rng.gen_range(-amplitude..=amplitude);
        for j in y0..=y1 {
            for i in x0..=x1 {
                psi[grid.interior_index(i, j)] += level;
            }
        }
    }
    psi
}

fn ordered(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

fn rng_for(seed: u64, index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// `count` seeded piecewise-constant perturbations of `u`, each agreeing
/// with `boundary` on the collar. The stream depends on (seed, index) only.
pub fn comparison_family(
    grid: &Grid,
    u: &ScalarField,
    boundary: &ScalarField,
    count: usize,
    seed: u64,
    index: usize,
) -> Result<Vec<ScalarField>> {
    let mut rng = rng_for(seed, index);
    let scale = 1.0 + u.interior_linf(grid);
    let base = crate::domain::extend_with_boundary(grid, u, boundary)?;
    (0..count)
        .map(|_| {
            let psi = random_boxes(grid, &mut rng, scale);
            let values = base.values().iter().zip(&psi).map(|(a, b)| a + b).collect();
            ScalarField::new(grid, values)
        })
        .collect()
}

fn check_collars(grid: &Grid, comparisons: &[ScalarField], boundary: &ScalarField) -> Result<()> {
    for (index, v) in comparisons.iter().enumerate() {
        v.check(grid)?;
        if !v.collar_matches(boundary, grid, 0.0) {
            return Err(Error::CollarMismatch { index });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationalReport {
    /// max over v of ‖Du‖ − Σ ∂ₜu·(v − u)·h^d − ‖Dv‖; ≤ 0 when the
    /// inequality holds.
    pub worst_violation: f64,
    pub failures: usize,
    pub comparisons: usize,
    pub tolerance: f64,
}

impl VariationalReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Checks ‖Du‖(Ω̄) ≤ Σ (u − u_prev)/τ·(v − u)·h^d + ‖Dv‖(Ω̄) + tol for every
/// comparison v.
pub fn verify_variational(
    grid: &Grid,
    u: &ScalarField,
    u_prev: &ScalarField,
    boundary: &ScalarField,
    tau: f64,
    comparisons: &[ScalarField],
    tol: f64,
) -> Result<VariationalReport> {
    check_collars(grid, comparisons, boundary)?;
    let dt = dt_field(grid, u, u_prev, tau);
    let tv_u = total_variation(grid, u, boundary)?;
    let mut worst = f64::NEG_INFINITY;
    let mut failures = 0;
    for v in comparisons {
        let rhs = dt.interior_dot(&v.sub(u), grid) + total_variation(grid, v, boundary)?;
        let violation = tv_u - rhs;
        if violation > tol {
            failures += 1;
        }
        worst = worst.max(violation);
    }
    Ok(VariationalReport {
        worst_violation: if comparisons.is_empty() { 0.0 } else { worst },
        failures,
        comparisons: comparisons.len(),
        tolerance: tol,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakReport {
    pub z_linf: f64,
    /// ‖div z − (u − u_prev)/τ‖∞
    pub div_residual: f64,
    /// |(z, Du)_{u₀} − ‖Du‖(Ω̄)|
    pub pairing_residual: f64,
    /// max over v of |‖Du‖ + Σ ∂ₜu·(u − v)·h^d − (z, Dv)_{u₀}|
    pub identity_residual: f64,
    pub bound_ok: bool,
    pub divergence_ok: bool,
    pub pairing_ok: bool,
    pub identity_ok: bool,
    pub tolerance: f64,
}

impl WeakReport {
    pub fn passed(&self) -> bool {
        self.bound_ok && self.divergence_ok && self.pairing_ok && self.identity_ok
    }

    /// Names of the failed conditions.
    pub fn failures(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !self.bound_ok {
            out.push("z_bound");
        }
        if !self.divergence_ok {
            out.push("divergence");
        }
        if !self.pairing_ok {
            out.push("maximal_pairing");
        }
        if !self.identity_ok {
            out.push("weak_identity");
        }
        out
    }
}

/// Checks the weak formulation of one slice from (u, z) alone: the bound
/// on z, div z = ∂ₜu, the maximal pairing, and for every comparison the
/// identity ‖Du‖ + Σ ∂ₜu·(u − v)·h^d = (z, Dv)_{u₀}.
#[allow(clippy::too_many_arguments)]
pub fn verify_weak(
    grid: &Grid,
    u: &ScalarField,
    z: &FaceField,
    u_prev: &ScalarField,
    boundary: &ScalarField,
    tau: f64,
    comparisons: &[ScalarField],
    tol: f64,
) -> Result<WeakReport> {
    check_collars(grid, comparisons, boundary)?;
    let dt = dt_field(grid, u, u_prev, tau);
    let div = divergence(grid, z)?;
    let div_residual = grid
        .interior_cells()
        .iter()
        .map(|&k| (div.values()[k] - dt.values()[k]).abs())
        .fold(0.0, f64::max);
    let tv_u = total_variation(grid, u, boundary)?;
    let pairing_residual = (pairing(grid, z, u, boundary)?.value - tv_u).abs();
    let z_linf = z.linf(grid);

    let mut identity_residual: f64 = 0.0;
    for v in comparisons {
        let lhs = tv_u + dt.interior_dot(&u.sub(v), grid);
        let rhs = pairing(grid, z, v, boundary)?.value;
        identity_residual = identity_residual.max((lhs - rhs).abs());
    }
    Ok(WeakReport {
        z_linf,
        div_residual,
        pairing_residual,
        identity_residual,
        bound_ok: z_linf <= 1.0 + tol,
        divergence_ok: div_residual <= tol,
        pairing_ok: pairing_residual <= tol,
        identity_ok: identity_residual <= tol,
        tolerance: tol,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryReport {
    /// max over comparison trajectories of lhs − rhs of the time-summed
    /// inequality; ≤ 0 when it holds.
    pub worst_violation: f64,
    pub comparisons: usize,
}

/// Time-summed variational inequality
///
///   Σ_k τ‖Du^k‖ ≤ Σ_k τ[⟨(v^k − v^{k−1})/τ, v^k − u^k⟩ + ‖Dv^k‖]
///                 − ½‖v^K − u^K‖² + ½‖v^0 − u^0‖²
///
/// for comparison trajectories v^k = u^k + (a + b·t_k)·ψ with seeded
/// piecewise-constant ψ, plus v^k = u₀(t_k). It follows from the slicewise
/// inequalities, so it checks their summation as a whole.
pub fn verify_trajectory(
    grid: &Grid,
    states: &[ScalarField],
    boundary: &[ScalarField],
    tau: f64,
    count: usize,
    seed: u64,
) -> Result<TrajectoryReport> {
    if states.len() != boundary.len() || states.is_empty() {
        return Err(Error::param("states", "need one state per boundary node"));
    }
    let mut rng = rng_for(seed, usize::MAX);
    let horizon = tau * (states.len() - 1) as f64;
    let scale = 1.0 + states.iter().map(|s| s.interior_linf(grid)).fold(0.0, f64::max);

    let mut candidates: Vec<Vec<ScalarField>> = vec![boundary.to_vec(), states.to_vec()];
    for _ in 0..count {
        let psi = random_boxes(grid, &mut rng, scale);
        let a: f64 = rng.gen_range(-1.0..=1.0);
        let b: f64 = rng.gen_range(-1.0..=1.0) / horizon.max(tau);
        let traj = states
            .iter()
            .enumerate()
            .map(|(k, u)| {
                let w = a + b * tau * k as f64;
                let values = u.values().iter().zip(&psi).map(|(x, p)| x + w * p).collect();
                ScalarField::new(grid, values)
            })
            .collect::<Result<Vec<_>>>()?;
        candidates.push(traj);
    }

    let mut worst = f64::NEG_INFINITY;
    for v in &candidates {
        let mut lhs = 0.0;
        let mut rhs = 0.0;
        for k in 1..states.len() {
            lhs += tau * total_variation(grid, &states[k], &boundary[k])?;
            let dv = v[k].sub(&v[k - 1]);
            rhs += dv.interior_dot(&v[k].sub(&states[k]), grid) + tau * total_variation(grid, &v[k], &boundary[k])?;
        }
        let last = states.len() - 1;
        rhs -= 0.5 * v[last].sub(&states[last]).interior_l2(grid).powi(2);
        rhs += 0.5 * v[0].sub(&states[0]).interior_l2(grid).powi(2);
        worst = worst.max(lhs - rhs);
    }
    Ok(TrajectoryReport {
        worst_violation: worst,
        comparisons: candidates.len(),
    })
}
