//! Reference computations that share no code with the library: plain
//! slices in, plain numbers out.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A 1D problem on n cells of width h. `u0` has n + 2 entries: the left
/// collar value, the n interior values and the right collar value.
#[derive(Debug, Clone)]
pub struct Problem1d {
    pub h: f64,
    pub mu: f64,
    pub lambda: f64,
    pub f: Vec<f64>,
    pub u0: Vec<f64>,
}

impl Problem1d {
    pub fn n(&self) -> usize {
        self.f.len()
    }

    pub fn random(rng: &mut ChaCha8Rng, n: usize, mu: f64, lambda: f64) -> Problem1d {
        Problem1d {
            h: 1.0 / n as f64,
            mu,
            lambda,
            f: (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect(),
            u0: (0..n + 2).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        }
    }

    /// Objective at interior values `u`: regularized interior jumps, one
    /// μ·h for the last cell (it owns no interior face), plain boundary
    /// jumps, and the zero-order terms.
    pub fn objective(&self, u: &[f64]) -> f64 {
        let (n, h, mu) = (self.n(), self.h, self.mu);
        let (a, b) = (self.u0[0], self.u0[n + 1]);
        let mut s = (u[0] - a).abs() + (b - u[n - 1]).abs() + mu * h;
        for i in 0..n - 1 {
            let d = (u[i + 1] - u[i]) / h;
            s += h * (mu * mu + d * d).sqrt();
        }
        for i in 0..n {
            s += h * (0.5 * self.lambda * u[i] * u[i] + self.f[i] * (u[i] - self.u0[i + 1]));
        }
        s
    }
}

/// FISTA with gradient-based restart on the smooth part of the primal
/// (μ > 0): interior jumps are smooth, the boundary jumps and zero-order
/// terms go into a closed-form prox.
fn primal_fista(p: &Problem1d, start: Vec<f64>, iters: usize) -> Vec<f64> {
    let (n, h, mu) = (p.n(), p.h, p.mu);
    let (a, b) = (p.u0[0], p.u0[n + 1]);
    let t = mu * h / 4.0;
    let grad = |u: &[f64]| {
        let mut g = vec![0.0; n];
        for i in 0..n - 1 {
            let d = (u[i + 1] - u[i]) / h;
            let s = d / (mu * mu + d * d).sqrt();
            g[i] -= s;
            g[i + 1] += s;
        }
        g
    };
    let prox = |y: &[f64]| -> Vec<f64> {
        let shrink = 1.0 + t * h * p.lambda;
        (0..n)
            .map(|i| {
                let m = (y[i] - t * h * p.f[i]) / shrink;
                let anchor = if i == 0 {
                    Some(a)
                } else if i == n - 1 {
                    Some(b)
                } else {
                    None
                };
                match anchor {
                    Some(c) => c + (m - c).signum() * ((m - c).abs() - t / shrink).max(0.0),
                    None => m,
                }
            })
            .collect()
    };
    let mut x = start;
    let mut y = x.clone();
    let mut theta: f64 = 1.0;
    for _ in 0..iters {
        let g = grad(&y);
        let step: Vec<f64> = y.iter().zip(&g).map(|(yi, gi)| yi - t * gi).collect();
        let xn = prox(&step);
        let restart = y.iter().zip(&xn).zip(&x).map(|((yi, xi), xo)| (yi - xi) * (xi - xo)).sum::<f64>() > 0.0;
        let change = xn.iter().zip(&x).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
        if restart {
            theta = 1.0;
            y = xn.clone();
        } else {
            let tn = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
            let beta = (theta - 1.0) / tn;
            y = xn.iter().zip(&x).map(|(u, v)| u + beta * (u - v)).collect();
            theta = tn;
        }
        x = xn;
        if change < 1e-15 {
            break;
        }
    }
    x
}

/// Projected FISTA on the dual of the μ = 0, λ > 0 problem. Face j
/// (0..=n) sits between extended cells j and j + 1; the primal is
/// recovered as u = −(Kp + h·f)/(hλ) with (Kp)_i = p_{i−1} − p_i.
fn dual_fista(p: &Problem1d, start: Vec<f64>, iters: usize) -> Vec<f64> {
    let (n, h, lam) = (p.n(), p.h, p.lambda);
    let (a, b) = (p.u0[0], p.u0[n + 1]);
    let recover = |q: &[f64]| -> Vec<f64> { (0..n).map(|i| -(q[i] - q[i + 1] + h * p.f[i]) / (h * lam)).collect() };
    let t = h * lam / 4.0;
    let mut x = start;
    let mut y = x.clone();
    let mut theta: f64 = 1.0;
    for _ in 0..iters {
        let u = recover(&y);
        // ascent direction of the dual at y
        let g: Vec<f64> = (0..=n)
            .map(|j| {
                let left = if j >= 1 { u[j - 1] } else { a };
                let right = if j < n { u[j] } else { b };
                right - left
            })
            .collect();
        let xn: Vec<f64> = y.iter().zip(&g).map(|(yi, gi)| (yi + t * gi).clamp(-1.0, 1.0)).collect();
        let restart = y.iter().zip(&xn).zip(&x).map(|((yi, xi), xo)| (yi - xi) * (xi - xo)).sum::<f64>() > 0.0;
        let change = xn.iter().zip(&x).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
        if restart {
            theta = 1.0;
            y = xn.clone();
        } else {
            let tn = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
            let beta = (theta - 1.0) / tn;
            y = xn.iter().zip(&x).map(|(u, v)| (u + beta * (u - v)).clamp(-1.0, 1.0)).collect();
            theta = tn;
        }
        x = xn;
        if change < 1e-16 {
            break;
        }
    }
    recover(&x)
}

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub value: f64,
    /// Largest difference between the values reached from different starts.
    pub spread: f64,
}

/// Multi-start proximal-gradient minimum of `p.objective`. Needs μ > 0
/// or λ > 0.
pub fn proximal_gradient_oracle(p: &Problem1d, starts: usize, seed: u64) -> OracleResult {
    assert!(p.mu > 0.0 || p.lambda > 0.0, "no proximal-gradient oracle for μ = λ = 0");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = p.n();
    let values: Vec<f64> = (0..starts)
        .map(|_| {
            let u = if p.mu > 0.0 {
                primal_fista(p, (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect(), 400_000)
            } else {
                dual_fista(p, (0..=n).map(|_| rng.gen_range(-1.0..1.0)).collect(), 400_000)
            };
            p.objective(&u)
        })
        .collect();
    let best = values.iter().copied().fold(f64::INFINITY, f64::min);
    let worst = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    OracleResult {
        value: best,
        spread: worst - best,
    }
}

/// Exact optimum of the μ = λ = 0 problem: the dual constraint fixes
/// p_j = c + h·Σ_{i≤j} f_i up to the constant c, and the dual objective is
/// linear in c on the interval that keeps every |p_j| ≤ 1.
pub fn plain_tv_value(p: &Problem1d) -> Option<f64> {
    assert!(p.mu == 0.0 && p.lambda == 0.0);
    let n = p.n();
    let (a, b) = (p.u0[0], p.u0[n + 1]);
    let mut partial = vec![0.0; n + 1];
    for j in 1..=n {
        partial[j] = partial[j - 1] + p.h * p.f[j - 1];
    }
    let lo = partial.iter().map(|s| -1.0 - s).fold(f64::NEG_INFINITY, f64::max);
    let hi = partial.iter().map(|s| 1.0 - s).fold(f64::INFINITY, f64::min);
    if lo > hi {
        return None;
    }
    let constant = -p.h * (0..n).map(|i| p.f[i] * p.u0[i + 1]).sum::<f64>();
    // value(c) = −a·c + b·(c + partial_n) + constant
    let value = |c: f64| (b - a) * c + b * partial[n] + constant;
    Some(value(lo).max(value(hi)))
}

/// Minimum of Σ|ū_{j+1} − ū_j| over interior values drawn from `levels`,
/// by enumeration. `collar` holds the two boundary values.
pub fn brute_force_tv(n: usize, collar: [f64; 2], levels: &[f64]) -> f64 {
    let m = levels.len();
    let total = m.pow(n as u32);
    let mut best = f64::INFINITY;
    let mut u = vec![0.0; n + 2];
    u[0] = collar[0];
    u[n + 1] = collar[1];
    for code in 0..total {
        let mut c = code;
        for slot in u.iter_mut().skip(1).take(n) {
            *slot = levels[c % m];
            c /= m;
        }
        let tv: f64 = u.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
        best = best.min(tv);
    }
    best
}

/// Taut-string solution of min Σ|u_{i+1} − u_i| + (1/2τ)·Σ w_i·(u_i − g_i)²
/// with free ends. The cumulative sum X_k = Σ_{i≤k} w_i·u_i is the shortest
/// path from (0, 0) to (W, S_N) through the tube |X_k − S_k| ≤ τ.
pub fn taut_string(widths: &[f64], data: &[f64], tau: f64) -> Vec<f64> {
    let n = widths.len();
    let mut x = vec![0.0; n + 1];
    let mut s = vec![0.0; n + 1];
    for i in 0..n {
        x[i + 1] = x[i] + widths[i];
        s[i + 1] = s[i] + widths[i] * data[i];
    }
    let lower = |k: usize| if k == 0 || k == n { s[k] } else { s[k] - tau };
    let upper = |k: usize| if k == 0 || k == n { s[k] } else { s[k] + tau };

    let mut u = vec![0.0; n];
    let (mut i, mut yi) = (0usize, 0.0);
    while i < n {
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        let (mut klo, mut khi) = (i, i);
        let mut end = None;
        for k in i + 1..=n {
            let dx = x[k] - x[i];
            let l = (lower(k) - yi) / dx;
            let h = (upper(k) - yi) / dx;
            if l > hi {
                // the string bends down at the upper vertex that bound it
                end = Some((khi, hi, upper(khi)));
                break;
            }
            if h < lo {
                end = Some((klo, lo, lower(klo)));
                break;
            }
            if l > lo {
                lo = l;
                klo = k;
            }
            if h < hi {
                hi = h;
                khi = k;
            }
        }
        let (k, slope, yk) = end.unwrap_or((n, (s[n] - yi) / (x[n] - x[i]), s[n]));
        for slot in u.iter_mut().take(k).skip(i) {
            *slot = slope;
        }
        i = k;
        yi = yk;
    }
    u
}

/// One implicit TV step with Dirichlet values `a`, `b`: the collar is
/// emulated by two padding cells of width `pad` carrying the boundary
/// values, whose solution moves by O(τ/pad).
pub fn taut_string_dirichlet_step(h: f64, prev: &[f64], a: f64, b: f64, tau: f64) -> Vec<f64> {
    let pad = 1e8;
    let mut widths = vec![pad];
    widths.extend(std::iter::repeat_n(h, prev.len()));
    widths.push(pad);
    let mut data = vec![a];
    data.extend_from_slice(prev);
    data.push(b);
    let u = taut_string(&widths, &data, tau);
    u[1..u.len() - 1].to_vec()
}
