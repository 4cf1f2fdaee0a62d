//! Termwise transcription of the one-dimensional pressure equation on an 8-cell grid.

use soh_core::grid::make_grid;
use soh_core::scheme::{assemble_elliptic_1d, newton_elliptic};
use soh_core::{FieldState, ModelParams, PressureModel};

fn wrap(j: isize, n: usize) -> usize {
    j.rem_euclid(n as isize) as usize
}

#[test]
fn single_bump_rhs_matches_direct_transcription() {
    let n = 8;
    let params = ModelParams {
        dx: 0.125,
        dt: 0.01,
        ..ModelParams::default()
    };
    let pm = PressureModel::new(&params).unwrap();
    let grid = make_grid(n, 1, params.dx, 1.0).unwrap();
    let mut s = FieldState::uniform(&grid, 0.6, (0.3, 0.0));
    s.rho[3] = 0.85;
    s.q1[3] = 0.5;
    s.q1[5] = -0.2;

    let (dt, dx, lam, c) = (params.dt, params.dx, params.lambda, params.c);
    let rho = |j: isize| s.rho[wrap(j, n)];
    let q = |j: isize| s.q1[wrap(j, n)];
    let cj = |j: isize| (q(j) / rho(j)).abs() + (lam * pm.dp0(rho(j)).unwrap()).sqrt();
    let cface = |j: isize| cj(j).max(cj(j + 1));
    let flux = |j: isize| {
        0.5 * (c * q(j) * q(j) / rho(j) + c * q(j + 1) * q(j + 1) / rho(j + 1)
            + lam * pm.split_p0(rho(j + 1)).unwrap()
            + lam * pm.split_p0(rho(j)).unwrap())
            - 0.5 * cface(j) * (q(j + 1) - q(j))
    };

    let sys = assemble_elliptic_1d(&grid, &s, &params, &pm).unwrap();
    for j in 0..n as isize {
        let want = rho(j) - dt / (2.0 * dx) * (q(j + 1) - q(j - 1))
            + dt / (2.0 * dx) * (cface(j) * (rho(j + 1) - rho(j)) - cface(j - 1) * (rho(j) - rho(j - 1)))
            + dt * dt / (2.0 * dx * dx) * (flux(j + 1) - flux(j) - flux(j - 1) + flux(j - 2));
        let got = sys.rhs[j as usize];
        assert!((got - want).abs() <= 1e-14, "cell {j}: {got} vs {want}");
        let phi = q(j) - dt / dx * (flux(j) - flux(j - 1));
        assert!((sys.phi1[j as usize] - phi).abs() <= 1e-14);
    }
    assert!((sys.coef_x - dt * dt * lam / (4.0 * dx * dx)).abs() < 1e-18);
    assert!((sys.grad_x - dt * lam / (2.0 * dx)).abs() < 1e-18);
    assert_eq!(sys.coef_y, 0.0);

    // solved densities satisfy the transcribed equation
    let guess: Vec<f64> = s.rho.iter().map(|&r| pm.split_p1(r).unwrap()).collect();
    let sol = newton_elliptic(&sys, &pm, &guess).unwrap();
    let p = |j: isize| sol.p1[wrap(j, n)];
    for j in 0..n as isize {
        let lhs = sol.rho[j as usize] - dt * dt * lam / (4.0 * dx * dx) * (p(j + 2) - 2.0 * p(j) + p(j - 2));
        assert!((lhs - sys.rhs[j as usize]).abs() <= 1e-10 * 2.0);
    }
}

#[test]
fn solution_does_not_depend_on_the_initial_guess() {
    let params = ModelParams::default();
    let pm = PressureModel::new(&params).unwrap();
    let grid = make_grid(64, 1, params.dx, 1.0).unwrap();
    let mut s = FieldState::uniform(&grid, 0.7, (0.0, 0.0));
    for k in 0..64 {
        let x = k as f64 / 64.0;
        s.rho[k] = 0.8 + 0.19 * (std::f64::consts::TAU * x).sin();
        s.q1[k] = s.rho[k] * (std::f64::consts::TAU * x).cos();
    }
    let sys = assemble_elliptic_1d(&grid, &s, &params, &pm).unwrap();
    let previous: Vec<f64> = s.rho.iter().map(|&r| pm.split_p1(r).unwrap()).collect();
    let a = newton_elliptic(&sys, &pm, &previous).unwrap();
    let b = newton_elliptic(&sys, &pm, &vec![0.0; 64]).unwrap();
    for k in 0..64 {
        assert!((a.rho[k] - b.rho[k]).abs() <= 1e-9);
    }
    for w in a.residual_history.windows(2) {
        assert!(w[1] <= w[0]);
    }
    assert!(a.iterations <= 50);
}
