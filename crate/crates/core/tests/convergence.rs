//! Explicit and AP steps agree to second order per step on smooth low-density data.

use soh_core::grid::make_grid;
use soh_core::{ap_step, explicit_step, FieldState, ModelParams, PressureModel};

/// Max-norm gap between one explicit and one AP step with `dx = 100 dt`.
fn step_gap(dt: f64) -> f64 {
    let dx = 100.0 * dt;
    let n = (1.0 / dx).round() as usize;
    let params = ModelParams {
        dt,
        dx,
        beta: 1.0,
        ..ModelParams::default()
    };
    let pm = PressureModel::new(&params).unwrap();
    let grid = make_grid(n, 1, dx, 1.0).unwrap();
    let mut s = FieldState::uniform(&grid, 0.0, (0.0, 0.0));
    for k in 0..n {
        let x = (k as f64 + 0.5) * dx;
        let rho = 0.3 + 0.05 * (std::f64::consts::TAU * x).sin();
        let th = 0.4 + 0.3 * (std::f64::consts::TAU * x).cos();
        s.rho[k] = rho;
        s.q1[k] = rho * th.cos();
        s.q2[k] = rho * th.sin();
    }
    let (a, _) = ap_step(&grid, &s, &params, &pm).unwrap();
    let (e, _) = explicit_step(&grid, &s, &params, &pm).unwrap();
    (0..n)
        .map(|k| {
            (a.rho[k] - e.rho[k])
                .abs()
                .max((a.q1[k] - e.q1[k]).abs())
                .max((a.q2[k] - e.q2[k]).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn per_step_gap_is_second_order() {
    let coarse = step_gap(1e-4);
    let fine = step_gap(5e-5);
    let ratio = coarse / fine;
    assert!(coarse < 1e-5, "{coarse:e}");
    assert!((3.0..5.0).contains(&ratio), "gap {coarse:e} -> {fine:e}, ratio {ratio}");
}
