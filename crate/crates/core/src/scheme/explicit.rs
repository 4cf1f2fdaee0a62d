//! Fully explicit Rusanov reference stepper using the full pressure.

use crate::error::SchemeError;
use crate::grid::{FieldState, Grid, ModelParams, RHO_MIN};
use crate::pressure::PressureModel;

use super::speeds::{cell_speeds, face_coeffs, SpeedMode};
use super::{congested_fraction, lattice_oscillation, relaxation_step, StepReport};

fn blow_up(cell: usize, reason: impl Into<String>) -> SchemeError {
    SchemeError::BlowUp {
        cell,
        reason: reason.into(),
    }
}

/// Explicit Rusanov step with `p_eps` in both the flux and the diffusion
/// coefficient, followed by the same relaxation as [`super::ap_step`].
///
/// Non-finite values or densities at or above `rho_star` are reported as
/// [`SchemeError::BlowUp`].
pub fn explicit_step(
    grid: &Grid,
    state: &FieldState,
    params: &ModelParams,
    pressure: &PressureModel,
) -> Result<(FieldState, StepReport), SchemeError> {
    state.check_shape(grid)?;
    let n = grid.len();
    let speeds = cell_speeds(state, params, pressure, SpeedMode::Full)
        .map_err(|(k, e)| blow_up(k, e.to_string()))?;
    let (cx, cy) = face_coeffs(grid, &speeds);

    let mut f = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut g = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for k in 0..n {
        let rho = state.rho[k].max(RHO_MIN);
        let (a, b) = (state.q1[k], state.q2[k]);
        let p = params.lambda * pressure.p_eps(rho).map_err(|e| blow_up(k, e.to_string()))?;
        f[0][k] = a;
        f[1][k] = params.c * a * a / rho + p;
        f[2][k] = params.c * a * b / rho;
        g[0][k] = b;
        g[1][k] = params.c * a * b / rho;
        g[2][k] = params.c * b * b / rho + p;
    }
    let u = [&state.rho, &state.q1, &state.q2];
    let mut out = [state.rho.clone(), state.q1.clone(), state.q2.clone()];
    let (lx, ly) = (params.dt / grid.dx, params.dt / grid.dy);
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let k = grid.idx(i, j);
            let (e, w) = (grid.offset(i, j, 1, 0), grid.offset(i, j, -1, 0));
            let (nn, s) = (grid.offset(i, j, 0, 1), grid.offset(i, j, 0, -1));
            for m in 0..3 {
                let east = 0.5 * (f[m][k] + f[m][e]) - 0.5 * cx[k] * (u[m][e] - u[m][k]);
                let west = 0.5 * (f[m][w] + f[m][k]) - 0.5 * cx[w] * (u[m][k] - u[m][w]);
                out[m][k] -= lx * (east - west);
                if !grid.is_1d() {
                    let north = 0.5 * (g[m][k] + g[m][nn]) - 0.5 * cy[k] * (u[m][nn] - u[m][k]);
                    let south = 0.5 * (g[m][s] + g[m][k]) - 0.5 * cy[s] * (u[m][k] - u[m][s]);
                    out[m][k] -= ly * (north - south);
                }
            }
        }
    }
    let [rho, q1, q2] = out;
    for k in 0..n {
        if !(rho[k].is_finite() && q1[k].is_finite() && q2[k].is_finite()) {
            return Err(blow_up(k, "non-finite value"));
        }
        if rho[k] >= pressure.rho_star() {
            return Err(blow_up(k, format!("density {} reached the congestion density", rho[k])));
        }
    }
    let mut next = FieldState {
        rho,
        q1,
        q2,
        time: state.time + params.dt,
    };
    next.apply_floor();
    let next = relaxation_step(&next, params);
    let max_speed = speeds.iter().cloned().fold(0.0, f64::max);
    let report = StepReport {
        max_char_speed: max_speed,
        cfl_explicit: params.dt * max_speed / grid.min_spacing(),
        congested_fraction: congested_fraction(&next.rho, pressure.rho_star(), params.congestion_tol),
        lattice_oscillation: lattice_oscillation(grid, &next.rho),
        ..StepReport::default()
    };
    Ok((next, report))
}
