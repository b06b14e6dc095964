mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{
    brute_force_tv, plain_tv_value, proximal_gradient_oracle, taut_string, taut_string_dirichlet_step, Problem1d,
};
use tvflow::elliptic::{minimize_psi, SolverConfig};
use tvflow::flow::step;
use tvflow::{EnergyParams, Grid, GridSpec, ScalarField};

fn params(grid: &Grid, p: &Problem1d) -> EnergyParams {
    let n = p.n();
    let mut f = vec![0.0; n + 2];
    f[1..=n].copy_from_slice(&p.f);
    EnergyParams::new(
        grid,
        p.mu,
        p.lambda,
        ScalarField::new(grid, f).unwrap(),
        ScalarField::new(grid, p.u0.clone()).unwrap(),
    )
    .unwrap()
}

#[test]
fn taut_string_reproduces_known_denoising() {
    // a single step of height 1 on unit cells: the jump shrinks by τ on
    // each side while the string stays inside the tube
    let u = taut_string(&[1.0; 4], &[0.0, 0.0, 1.0, 1.0], 0.25);
    let expected = [0.125, 0.125, 0.875, 0.875];
    for (a, b) in u.iter().zip(expected) {
        assert!((a - b).abs() < 1e-14, "{u:?}");
    }
    // large τ flattens to the mean
    let u = taut_string(&[1.0, 2.0, 1.0], &[3.0, -1.0, 2.0], 100.0);
    assert!(u.iter().all(|v| (v - 0.75).abs() < 1e-14), "{u:?}");
}

#[test]
fn implicit_step_matches_taut_string() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let n = rng.gen_range(3..=12);
        let h = 1.0 / n as f64;
        let grid = Grid::new(&GridSpec::line(n, h)).unwrap();
        let values: Vec<f64> = (0..n + 2).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let prev = ScalarField::new(&grid, values.clone()).unwrap();
        let tau = rng.gen_range(0.005..0.05);
        let slice = step(&grid, &prev, &prev, tau, &SolverConfig::default()).unwrap();
        let oracle = taut_string_dirichlet_step(h, &values[1..=n], values[0], values[n + 1], tau);
        for (i, o) in oracle.iter().enumerate() {
            let u = slice.u.values()[i + 1];
            assert!((u - o).abs() < 1e-6, "n={n} i={i}: solver {u} oracle {o}");
        }
    }
}

#[test]
fn proximal_gradient_oracle_agrees_with_solver() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for &(mu, lambda) in &[(0.3, 0.5), (1.0, 0.0), (0.0, 0.5), (0.3, 1.0)] {
        let n = rng.gen_range(2..=8);
        let p = Problem1d::random(&mut rng, n, mu, lambda);
        let grid = Grid::new(&GridSpec::line(n, p.h)).unwrap();
        let sol = minimize_psi(&grid, &params(&grid, &p), &SolverConfig::default()).unwrap();
        let oracle = proximal_gradient_oracle(&p, 4, 1);
        assert!(oracle.spread < 1e-9, "{oracle:?}");
        let err = (sol.certificate.primal_value - oracle.value).abs();
        assert!(err < 1e-7, "mu={mu} lambda={lambda}: err {err}");
        // the independent objective agrees with the library's at the solver's point
        let own = p.objective(&sol.u.interior(&grid));
        assert!((own - sol.certificate.primal_value).abs() < 1e-12);
    }
}

#[test]
fn plain_tv_problem_matches_exact_value() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..5 {
        let n = rng.gen_range(2..=8);
        let p = Problem1d::random(&mut rng, n, 0.0, 0.0);
        let exact = plain_tv_value(&p).expect("|f| ≤ 1/2 keeps the problem bounded");
        let grid = Grid::new(&GridSpec::line(n, p.h)).unwrap();
        let sol = minimize_psi(&grid, &params(&grid, &p), &SolverConfig::default()).unwrap();
        let err = (sol.certificate.primal_value - exact).abs();
        assert!(err < 1e-7, "err {err}");
    }
}

#[test]
fn brute_force_value_of_linear_datum() {
    let levels: Vec<f64> = (0..=4).map(|k| k as f64 / 4.0).collect();
    assert_eq!(brute_force_tv(8, [0.0, 1.0], &levels), 1.0);
    // equal boundary values: the constant is optimal
    assert_eq!(brute_force_tv(3, [1.0, 1.0], &levels), 0.0);
}
