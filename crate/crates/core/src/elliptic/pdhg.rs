//! First-order primal–dual iteration for the saddle form of Ψ.
//!
//! Three step-size regimes, picked from the strong convexity available:
//! constant steps when λ = 0, the accelerated primal variant when λ > 0,
//! and the linearly convergent variant when both λ > 0 and μ > 0 (the
//! conjugate −μ√(1 − |z|²) is μ-strongly convex on the ball).

use super::certificate::{certificate, DualityCertificate};
use super::{gradient_norm_squared, EllipticSolution, SolverConfig};
use crate::domain::{FaceField, Grid, ScalarField};
use crate::energy::EnergyParams;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Schedule {
    Constant,
    Accelerated { gamma: f64 },
    Linear { theta: f64 },
}

/// Root of r + s·r/√(1 − r²) = a on [0, 1), the radius of the proximal
/// point of σ·(−μ√(1 − |·|²)) at a vector of norm a, with s = σμ.
pub(crate) fn prox_radius(a: f64, s: f64, tol: f64) -> f64 {
    if a <= 0.0 {
        return 0.0;
    }
    if s <= 0.0 {
        return a.min(1.0);
    }
    // φ is increasing and convex on [0, 1); Newton from a point with φ ≥ 0
    // decreases monotonically onto the root. The bracket guards rounding.
    let mut lo = 0.0;
    let mut hi = if a < 1.0 { a } else { 1.0 };
    let mut r = if a < 1.0 {
        a
    } else {
        (a + 1.0) / (a + 1.0).hypot(s)
    };
    for _ in 0..200 {
        let w = ((1.0 - r) * (1.0 + r)).sqrt();
        let phi = r + s * r / w - a;
        if phi > 0.0 {
            hi = r;
        } else {
            lo = r;
        }
        let dphi = 1.0 + s / (w * w * w);
        let mut next = r - phi / dphi;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - r).abs() <= tol * r.max(f64::MIN_POSITIVE) || hi - lo <= tol * hi {
            return next;
        }
        r = next;
    }
    r
}

struct Workspace {
    u: Vec<f64>,
    u_old: Vec<f64>,
    u_bar: Vec<f64>,
    z: Vec<f64>,
    grad: Vec<f64>,
    div: Vec<f64>,
}

pub(super) fn run(grid: &Grid, params: &EnergyParams, cfg: &SolverConfig) -> Result<EllipticSolution> {
    let (mu, lambda) = (params.mu, params.lambda);
    let f = params.source.values();
    let u0 = params.boundary.values();
    let norm_sq = gradient_norm_squared(grid);
    let norm = norm_sq.sqrt();

    let schedule = if lambda > 0.0 && mu > 0.0 {
        let rate = 2.0 * (lambda * mu).sqrt() / norm;
        Schedule::Linear {
            theta: 1.0 / (1.0 + rate),
        }
    } else if lambda > 0.0 {
        Schedule::Accelerated { gamma: lambda }
    } else {
        Schedule::Constant
    };
    let (default_tau, default_sigma) = match schedule {
        Schedule::Linear { .. } => ((mu / lambda).sqrt() / norm, (lambda / mu).sqrt() / norm),
        _ => (1.0 / norm, 1.0 / norm),
    };
    let (mut tau, mut sigma) = match (cfg.primal_step, cfg.dual_step) {
        (Some(t), Some(s)) => (t, s),
        (Some(t), None) => (t, 1.0 / (t * norm_sq)),
        (None, Some(s)) => (1.0 / (s * norm_sq), s),
        (None, None) => (default_tau, default_sigma),
    };

    let f_linf = params.source.interior_linf(grid);
    let mut ws = Workspace {
        u: u0.to_vec(),
        u_old: u0.to_vec(),
        u_bar: u0.to_vec(),
        z: vec![0.0; grid.face_count()],
        grad: vec![0.0; grid.face_count()],
        div: vec![0.0; grid.cell_count()],
    };
    let mut last_gap = f64::INFINITY;

    for it in 1..=cfg.max_iterations {
        grid.gradient_into(&ws.u_bar, &mut ws.grad);
        for g in grid.groups() {
            let faces = g.faces();
            if faces.is_empty() {
                continue;
            }
            let mut a2 = 0.0;
            for &fi in faces {
                let y = ws.z[fi] + sigma * ws.grad[fi];
                ws.z[fi] = y;
                a2 += y * y;
            }
            let a = a2.sqrt();
            let r = if g.is_boundary() || mu == 0.0 {
                a.min(1.0)
            } else {
                prox_radius(a, sigma * mu, cfg.newton_tolerance)
            };
            if a > 0.0 && r != a {
                let scale = r / a;
                for &fi in faces {
                    ws.z[fi] *= scale;
                }
            }
        }
        grid.divergence_into(&ws.z, &mut ws.div);
        ws.u_old.copy_from_slice(&ws.u);
        let denom = 1.0 + tau * lambda;
        for &k in grid.interior_cells() {
            ws.u[k] = (ws.u[k] + tau * (ws.div[k] - f[k])) / denom;
        }
        let theta = match schedule {
            Schedule::Constant => 1.0,
            Schedule::Accelerated { gamma } => {
                let th = 1.0 / (1.0 + 2.0 * gamma * tau).sqrt();
                tau *= th;
                sigma /= th;
                th
            }
            Schedule::Linear { theta } => theta,
        };
        for &k in grid.interior_cells() {
            ws.u_bar[k] = ws.u[k] + theta * (ws.u[k] - ws.u_old[k]);
        }

        if it % cfg.check_every == 0 || it == cfg.max_iterations {
            let (u, z, cert) = evaluate(grid, params, &ws, it)?;
            last_gap = cert.gap;
            if converged(&cert, cfg.tolerance, f_linf, lambda, mu, &u, grid) {
                return Ok(EllipticSolution {
                    u,
                    z,
                    certificate: cert,
                });
            }
        }
    }
    Err(Error::NonConvergence {
        iterations: cfg.max_iterations,
        last_gap,
    })
}

/// Candidate pair for the certificate. With λ > 0 the primal field is read
/// off the dual one through div z = λu + f, so the divergence relation holds
/// to rounding and the gap measures the remaining Fenchel slack.
fn evaluate(
    grid: &Grid,
    params: &EnergyParams,
    ws: &Workspace,
    iterations: usize,
) -> Result<(ScalarField, FaceField, DualityCertificate)> {
    let mut values = ws.u.clone();
    if params.lambda > 0.0 {
        let f = params.source.values();
        for &k in grid.interior_cells() {
            values[k] = (ws.div[k] - f[k]) / params.lambda;
        }
    }
    let u = ScalarField::new(grid, values)?;
    let z = FaceField::new(grid, ws.z.clone())?;
    let cert = certificate(grid, params, &u, &z, iterations)?;
    Ok((u, z, cert))
}

fn converged(
    cert: &DualityCertificate,
    tol: f64,
    f_linf: f64,
    lambda: f64,
    mu: f64,
    u: &ScalarField,
    grid: &Grid,
) -> bool {
    let gap_ok = cert.gap.abs() <= tol * cert.scale();
    let div_ok = cert.div_residual_linf <= tol * (1.0 + f_linf + lambda * u.interior_linf(grid));
    let opt_ok = mu == 0.0 || cert.optimality_residual <= tol;
    gap_ok && div_ok && opt_ok
}
