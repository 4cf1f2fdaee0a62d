//! Time stepping.
//!
//! One AP step is the semi-implicit conservative step followed by the exact
//! relaxation of `|q / rho|` toward 1. The explicit Rusanov stepper with the
//! full pressure is kept as a reference for stability comparisons.

pub mod elliptic;
pub mod explicit;
pub mod speeds;

pub use elliptic::{
    assemble_elliptic, assemble_elliptic_1d, newton_elliptic, newton_elliptic_with, EllipticSystem,
    NewtonSolution, SolverOptions,
};
pub use explicit::explicit_step;
pub use speeds::{cell_speed, char_speeds_from_dp, char_speeds_relax, diffusion_coeff, SpeedMode};

use crate::error::SchemeError;
use crate::grid::{FieldState, Grid, ModelParams, RHO_MIN};
use crate::pressure::PressureModel;

/// Exponent above which `exp(-x)` is treated as exactly zero.
const EXP_CUTOFF: f64 = 700.0;

/// Per-step solver statistics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepReport {
    pub newton_iterations: usize,
    pub inner_linear_iterations: usize,
    /// Final Newton residual in max norm (zero for explicit steps).
    pub newton_residual: f64,
    pub max_char_speed: f64,
    /// `dt * max C / min(dx, dy)` with `C` the diffusion coefficient actually used.
    pub cfl_explicit: f64,
    pub congested_fraction: f64,
    /// Largest `|rho[i+1] - 2 rho[i] + rho[i-1]| / 4` over both directions.
    pub lattice_oscillation: f64,
}

/// Fraction of cells with `rho >= rho_star - tol`.
pub fn congested_fraction(rho: &[f64], rho_star: f64, tol: f64) -> f64 {
    if rho.is_empty() {
        return 0.0;
    }
    let level = rho_star - tol;
    rho.iter().filter(|&&r| r >= level).count() as f64 / rho.len() as f64
}

pub(crate) fn lattice_oscillation(grid: &Grid, rho: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let k = grid.idx(i, j);
            let ox = rho[grid.offset(i, j, 1, 0)] - 2.0 * rho[k] + rho[grid.offset(i, j, -1, 0)];
            worst = worst.max(ox.abs());
            if grid.ny > 2 {
                let oy = rho[grid.offset(i, j, 0, 1)] - 2.0 * rho[k] + rho[grid.offset(i, j, 0, -1)];
                worst = worst.max(oy.abs());
            }
        }
    }
    0.25 * worst
}

/// Semi-implicit conservative step: pressure solve, then momentum recovery.
pub fn conservative_step(
    grid: &Grid,
    state: &FieldState,
    params: &ModelParams,
    pressure: &PressureModel,
) -> Result<(FieldState, StepReport), SchemeError> {
    conservative_step_with(grid, state, params, pressure, SolverOptions::default())
}

pub fn conservative_step_with(
    grid: &Grid,
    state: &FieldState,
    params: &ModelParams,
    pressure: &PressureModel,
    options: SolverOptions,
) -> Result<(FieldState, StepReport), SchemeError> {
    let system = if grid.is_1d() {
        assemble_elliptic_1d(grid, state, params, pressure)?
    } else {
        assemble_elliptic(grid, state, params, pressure)?
    };
    let guess = previous_pressure(state, pressure)?;
    let sol = newton_elliptic_with(&system, pressure, &guess, options)?;
    let (q1, q2) = system.recover_momentum(&sol.p1);
    let mut next = FieldState {
        rho: sol.rho.clone(),
        q1,
        q2,
        time: state.time + params.dt,
    };
    next.apply_floor();
    let report = StepReport {
        newton_iterations: sol.iterations,
        inner_linear_iterations: sol.linear_iterations,
        newton_residual: sol.residual(),
        max_char_speed: system.max_speed,
        cfl_explicit: params.dt * system.max_speed / grid.min_spacing(),
        congested_fraction: congested_fraction(&next.rho, pressure.rho_star(), params.congestion_tol),
        lattice_oscillation: lattice_oscillation(grid, &next.rho),
    };
    Ok((next, report))
}

/// `p1(rho^n)` as Newton starting point.
pub(crate) fn previous_pressure(state: &FieldState, pressure: &PressureModel) -> Result<Vec<f64>, SchemeError> {
    state
        .rho
        .iter()
        .map(|&r| pressure.split_p1(r.max(RHO_MIN)).map_err(SchemeError::from))
        .collect()
}

/// Closed-form relaxation of `|Omega|` toward 1 over one step, density unchanged.
pub fn relaxation_step(state: &FieldState, params: &ModelParams) -> FieldState {
    let x = 2.0 * params.dt / params.beta;
    let decay = if x > EXP_CUTOFF { 0.0 } else { (-x).exp() };
    let mut out = state.clone();
    for k in 0..out.rho.len() {
        let rho = out.rho[k].max(RHO_MIN);
        let (a, b) = (out.q1[k] / rho, out.q2[k] / rho);
        let n2 = a * a + b * b;
        if n2 == 0.0 {
            continue;
        }
        let factor = 1.0 / (n2 + (1.0 - n2) * decay).sqrt();
        out.q1[k] = rho * (factor * a);
        out.q2[k] = rho * (factor * b);
    }
    out
}

/// Conservative step followed by relaxation.
pub fn ap_step(
    grid: &Grid,
    state: &FieldState,
    params: &ModelParams,
    pressure: &PressureModel,
) -> Result<(FieldState, StepReport), SchemeError> {
    let (half, report) = conservative_step(grid, state, params, pressure)?;
    Ok((relaxation_step(&half, params), report))
}
