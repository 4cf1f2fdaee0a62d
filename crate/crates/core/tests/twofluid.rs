//! Two-species crowd model: conservation, symmetry and lane diagnostics.

use soh_core::grid::make_grid;
use soh_core::twofluid::{init_crowd, lane_diagnostics, twofluid_step, TwoFluidState};
use soh_core::{Grid, ModelParams, PressureModel};

fn crowd_params() -> ModelParams {
    ModelParams {
        beta: 0.5,
        ..ModelParams::default()
    }
}

fn small_crowd(seed: u64) -> (Grid, TwoFluidState) {
    let grid = make_grid(30, 30, 1.0 / 30.0, 1.0 / 30.0).unwrap();
    (grid, init_crowd(&grid, seed).unwrap())
}

#[test]
fn species_masses_are_conserved_and_total_density_bounded() {
    let p = crowd_params();
    let pm = PressureModel::new(&p).unwrap();
    let (grid, mut s) = small_crowd(11);
    let (m_plus, m_minus) = (s.plus.mass(), s.minus.mass());
    for _ in 0..40 {
        s = twofluid_step(&grid, &s, &p, &pm).unwrap().0;
        assert!((s.plus.mass() - m_plus).abs() <= 1e-12 * m_plus);
        assert!((s.minus.mass() - m_minus).abs() <= 1e-12 * m_minus);
        assert!(s.total_density().iter().all(|&r| r <= p.rho_star));
        for sp in [&s.plus, &s.minus] {
            for k in 0..grid.len() {
                assert!(sp.w1[k].hypot(sp.w2[k]) <= 1.0 + 1e-12);
            }
        }
    }
}

#[test]
fn mirror_symmetric_state_stays_symmetric() {
    let p = crowd_params();
    let pm = PressureModel::new(&p).unwrap();
    let (grid, s) = small_crowd(5);
    // average a state with its mirror image to obtain a symmetric seed
    let m = s.mirrored(&grid);
    let mut sym = s.clone();
    for (a, b) in [(&mut sym.plus, &m.plus), (&mut sym.minus, &m.minus)] {
        for k in 0..grid.len() {
            a.rho[k] = 0.5 * (a.rho[k] + b.rho[k]);
        }
    }
    assert_eq!(sym.mirrored(&grid), sym);
    let mut state = sym;
    for _ in 0..10 {
        state = twofluid_step(&grid, &state, &p, &pm).unwrap().0;
    }
    let mirror = state.mirrored(&grid);
    let gap = state
        .plus
        .rho
        .iter()
        .zip(&mirror.plus.rho)
        .chain(state.plus.q1.iter().zip(&mirror.plus.q1))
        .chain(state.minus.q2.iter().zip(&mirror.minus.q2))
        .chain(state.minus.w1.iter().zip(&mirror.minus.w1))
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(gap <= 1e-12, "{gap:e}");
}

#[test]
fn first_step_moves_heavy_cells_with_their_majority() {
    let p = crowd_params();
    let pm = PressureModel::new(&p).unwrap();
    let grid = make_grid(200, 200, 0.005, 0.005).unwrap();
    let s = init_crowd(&grid, 1).unwrap();
    let d0 = lane_diagnostics(&s);
    assert!(d0.drho_stats.mean.abs() <= 0.01);
    assert!(d0.dq1.iter().all(|&v| v == 0.0));
    let (next, _) = twofluid_step(&grid, &s, &p, &pm).unwrap();
    let d1 = lane_diagnostics(&next);
    assert!(d1.correlation() > 0.9, "{}", d1.correlation());
}

#[test]
fn equal_seeds_give_identical_trajectories() {
    let p = crowd_params();
    let pm = PressureModel::new(&p).unwrap();
    let run = || {
        let (grid, mut s) = small_crowd(99);
        for _ in 0..3 {
            s = twofluid_step(&grid, &s, &p, &pm).unwrap().0;
        }
        s
    };
    assert_eq!(run(), run());
}
