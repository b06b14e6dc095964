//! Discrete W^{-1,∞} test: the smallest ‖z‖∞ among face fields with
//! div z = g on Ω.
//!
//! In 1D the divergence fixes z up to one constant, so the optimum is half
//! the oscillation of the discrete antiderivative of g. In 2D a primal–dual
//! iteration brackets the optimum between a certified lower bound
//! |Σ g·w| / Σ_groups |∇w| (any w vanishing on the collar) and the norm of
//! an exactly admissible witness.

use super::SolverConfig;
use crate::domain::{FaceField, Grid, ScalarField};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    /// True when the optimum is at most 1 + tolerance.
    pub feasible: bool,
    pub lower_bound: f64,
    /// ‖witness‖∞; the witness satisfies div z = g up to rounding.
    pub upper_bound: f64,
    pub witness: FaceField,
    pub iterations: usize,
}

impl FeasibilityReport {
    /// Distance of the bracket above the unit ball; positive margins mean
    /// infeasible by at least that much.
    pub fn margin(&self) -> f64 {
        self.lower_bound - 1.0
    }
}

/// Decides whether g lies in the discrete dual unit ball. Exact in 1D,
/// iterative in 2D.
pub fn dual_feasibility(grid: &Grid, g: &ScalarField, cfg: &SolverConfig) -> Result<FeasibilityReport> {
    g.check(grid)?;
    if grid.dimension() == 1 {
        let (witness, r) = exact_1d(grid, g.values())?;
        return Ok(FeasibilityReport {
            feasible: r <= 1.0 + cfg.tolerance,
            lower_bound: r,
            upper_bound: r,
            witness,
            iterations: 0,
        });
    }
    dual_feasibility_iterative(grid, g, cfg)
}

/// Sorted x-faces of one row of Ω, left to right.
fn row_faces(grid: &Grid, row: i64) -> Vec<usize> {
    let mut faces: Vec<(i64, usize)> = grid
        .faces()
        .iter()
        .enumerate()
        .filter(|(_, f)| f.axis == 0)
        .map(|(k, f)| (grid.relative_coords(f.lower), k))
        .filter(|(c, _)| c[1] == row)
        .map(|(c, k)| (c[0], k))
        .collect();
    faces.sort_unstable();
    faces.into_iter().map(|(_, k)| k).collect()
}

/// Along one row the faces carry z_k = c + h·Σ_{i<k} g_i; the constant c
/// centring the partial sums minimizes the maximum.
fn centred_antiderivative(h: f64, g_row: &[f64]) -> Vec<f64> {
    let mut partial = Vec::with_capacity(g_row.len() + 1);
    let mut s = 0.0;
    partial.push(0.0);
    for &gi in g_row {
        s += h * gi;
        partial.push(s);
    }
    let hi = partial.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = partial.iter().cloned().fold(f64::INFINITY, f64::min);
    let c = -0.5 * (hi + lo);
    partial.iter().map(|p| p + c).collect()
}

fn row_cells(grid: &Grid, row: usize) -> Vec<usize> {
    (0..grid.shape()[0]).map(|i| grid.interior_index(i, row)).collect()
}

fn exact_1d(grid: &Grid, g: &[f64]) -> Result<(FaceField, f64)> {
    let faces = row_faces(grid, 0);
    let g_row: Vec<f64> = row_cells(grid, 0).iter().map(|&k| g[k]).collect();
    let z_row = centred_antiderivative(grid.spacing(), &g_row);
    let mut z = vec![0.0; grid.face_count()];
    for (&f, v) in faces.iter().zip(z_row) {
        z[f] = v;
    }
    let witness = FaceField::new(grid, z)?;
    let r = witness.linf(grid);
    Ok((witness, r))
}

/// Adds, row by row on the x-faces, a centred antiderivative of the
/// residual g − div z, which makes the field exactly admissible.
fn repair(grid: &Grid, z: &[f64], g: &[f64], div: &mut [f64]) -> Vec<f64> {
    grid.divergence_into(z, div);
    let mut out = z.to_vec();
    let rows = if grid.dimension() == 2 { grid.shape()[1] } else { 1 };
    for j in 0..rows {
        let cells = row_cells(grid, j);
        let resid: Vec<f64> = cells.iter().map(|&k| g[k] - div[k]).collect();
        let corr = centred_antiderivative(grid.spacing(), &resid);
        for (&f, c) in row_faces(grid, j as i64).iter().zip(corr) {
            out[f] += c;
        }
    }
    out
}

/// Euclidean projection of the group norms onto the ℓ1 ball of radius t.
fn project_l1_ball(norms: &[f64], t: f64) -> Vec<f64> {
    let total: f64 = norms.iter().sum();
    if total <= t {
        return norms.to_vec();
    }
    let mut sorted = norms.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut shift = 0.0;
    for (k, &v) in sorted.iter().enumerate() {
        cum += v;
        let candidate = (cum - t) / (k + 1) as f64;
        if v - candidate > 0.0 {
            shift = candidate;
        } else {
            break;
        }
    }
    norms.iter().map(|&v| (v - shift).max(0.0)).collect()
}

/// Primal–dual bracketing of min ‖z‖∞ s.t. div z = g, usable in any
/// dimension. Stops once the bracket decides the question or has closed
/// to the tolerance.
pub fn dual_feasibility_iterative(grid: &Grid, g: &ScalarField, cfg: &SolverConfig) -> Result<FeasibilityReport> {
    g.check(grid)?;
    let tol = cfg.tolerance;
    let gv = g.values();
    let mut div = vec![0.0; grid.cell_count()];

    // Start from the row-wise witness; it is already admissible.
    let mut z = repair(grid, &vec![0.0; grid.face_count()], gv, &mut div);
    let mut best_z = z.clone();
    let mut best_upper = FaceField::from_raw_unchecked(z.clone()).linf(grid);
    let mut best_lower = 0.0f64;

    let norm = super::gradient_norm_squared(grid).sqrt();
    let (tau, sigma) = (1.0 / norm, 1.0 / norm);
    let mut w = vec![0.0; grid.cell_count()];
    let mut grad = vec![0.0; grid.face_count()];
    let mut z_old = z.clone();
    let mut z_bar = z.clone();
    let groups: Vec<&[usize]> = grid.groups().iter().map(|g| g.faces()).filter(|f| !f.is_empty()).collect();
    let mut group_norms = vec![0.0; groups.len()];

    let decided = |lower: f64, upper: f64| -> Option<bool> {
        if upper <= 1.0 + tol {
            Some(true)
        } else if lower > 1.0 + tol {
            Some(false)
        } else if upper - lower <= tol * (1.0 + upper) {
            Some(lower <= 1.0 + tol)
        } else {
            None
        }
    };
    if let Some(feasible) = decided(best_lower, best_upper) {
        return Ok(FeasibilityReport {
            feasible,
            lower_bound: best_lower,
            upper_bound: best_upper,
            witness: FaceField::new(grid, best_z)?,
            iterations: 0,
        });
    }

    for it in 1..=cfg.max_iterations {
        // Dual ascent on the multiplier w (zero on the collar).
        grid.divergence_into(&z_bar, &mut div);
        for &k in grid.interior_cells() {
            w[k] += sigma * (div[k] - gv[k]);
        }
        // z ← prox of τ‖·‖∞ at z − τ·div*(w) = z + τ∇w, via Moreau with the
        // projection onto the group-ℓ1 ball.
        grid.gradient_into(&w, &mut grad);
        z_old.copy_from_slice(&z);
        for (f, zf) in z.iter_mut().enumerate() {
            *zf += tau * grad[f];
        }
        for (n, faces) in group_norms.iter_mut().zip(&groups) {
            *n = faces.iter().map(|&f| z[f] * z[f]).sum::<f64>().sqrt();
        }
        let projected = project_l1_ball(&group_norms, tau);
        for ((faces, &n), &p) in groups.iter().zip(&group_norms).zip(&projected) {
            if n > 0.0 {
                let keep = 1.0 - p / n;
                for &f in faces.iter() {
                    z[f] *= keep;
                }
            }
        }
        for f in 0..z.len() {
            z_bar[f] = 2.0 * z[f] - z_old[f];
        }

        if it % cfg.check_every == 0 || it == cfg.max_iterations {
            let candidate = repair(grid, &z, gv, &mut div);
            let upper = FaceField::from_raw_unchecked(candidate.clone()).linf(grid);
            if upper < best_upper {
                best_upper = upper;
                best_z = candidate;
            }
            grid.gradient_into(&w, &mut grad);
            let tv0: f64 = groups
                .iter()
                .map(|faces| faces.iter().map(|&f| grad[f] * grad[f]).sum::<f64>().sqrt())
                .sum();
            if tv0 > 0.0 {
                let pair: f64 = grid.interior_cells().iter().map(|&k| gv[k] * w[k]).sum();
                best_lower = best_lower.max(pair.abs() / tv0);
            }
            if let Some(feasible) = decided(best_lower, best_upper) {
                return Ok(FeasibilityReport {
                    feasible,
                    lower_bound: best_lower,
                    upper_bound: best_upper,
                    witness: FaceField::new(grid, best_z)?,
                    iterations: it,
                });
            }
        }
    }
    Err(Error::NonConvergence {
        iterations: cfg.max_iterations,
        last_gap: best_upper - best_lower,
    })
}
