//! Row-wise agreement of the 2D stepper with the 1D stepper on y-independent data.

use soh_core::grid::make_grid;
use soh_core::scenarios::{init_riemann, RiemannDomain, RiemannSpec};
use soh_core::{ap_step, FieldState, ModelParams, PressureModel};

fn extend(state: &FieldState, nx: usize, ny: usize) -> FieldState {
    let tile = |v: &[f64]| (0..ny).flat_map(|_| v.iter().copied()).collect::<Vec<_>>();
    assert_eq!(state.rho.len(), nx);
    FieldState {
        rho: tile(&state.rho),
        q1: tile(&state.q1),
        q2: tile(&state.q2),
        time: state.time,
    }
}

#[test]
fn y_independent_data_matches_1d_over_50_steps() {
    let params = ModelParams::default();
    let pressure = PressureModel::new(&params).unwrap();
    let spec = RiemannSpec::reference();
    let domain = RiemannDomain::new(&spec, params.dx, 1, 1.0).unwrap();
    let (nx, ny) = (domain.grid.nx, 4);
    let grid2 = make_grid(nx, ny, params.dx, params.dy).unwrap();

    let mut one = init_riemann(&spec, &domain);
    let mut two = extend(&one, nx, ny);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        one = ap_step(&domain.grid, &one, &params, &pressure).unwrap().0;
        two = ap_step(&grid2, &two, &params, &pressure).unwrap().0;
        for j in 0..ny {
            for i in 0..nx {
                let k = grid2.idx(i, j);
                worst = worst
                    .max((two.rho[k] - one.rho[i]).abs())
                    .max((two.q1[k] - one.q1[i]).abs())
                    .max((two.q2[k] - one.q2[i]).abs());
            }
        }
    }
    assert!(worst <= 1e-12, "row-wise discrepancy {worst:e}");
}
