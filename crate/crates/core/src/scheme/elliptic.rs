//! Assembly and Newton solution of the discrete pressure equation.
//!
//! Eliminating the new momentum between the semi-implicit mass and
//! momentum updates gives, per cell,
//!
//! ```text
//! rho(p1) - a_x L_x p1 - a_y L_y p1 = rhs
//! ```
//!
//! with `a_x = dt^2 lambda / (4 dx^2)`, `a_y = dt^2 lambda / (4 dy^2)` and
//! `L_x p = p[i+2] - 2 p[i] + p[i-2]` (likewise `L_y`). The stride-2
//! operator comes from composing two centered differences, so the four
//! even/odd sub-lattices are uncoupled.

use crate::error::SchemeError;
use crate::grid::{FieldState, Grid, ModelParams, RHO_MIN};
use crate::pressure::PressureModel;

use super::speeds::{cell_speeds, face_coeffs, SpeedMode};

const NEWTON_MAX_ITER: usize = 50;
const NEWTON_TOL: f64 = 1e-10;
const NEWTON_POLISH: usize = 3;
const CG_REL_TOL: f64 = 1e-12;
const CG_MAX_FORCING: f64 = 0.1;
const CG_MAX_ITER: usize = 20_000;

/// Linear-solver options for the inner Newton step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Diagonal (Jacobi) preconditioning of the conjugate-gradient solve.
    pub jacobi: bool,
    /// Loosen the inner tolerance while the Newton residual is far above its target.
    pub inexact: bool,
    pub max_newton: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            jacobi: true,
            inexact: true,
            max_newton: NEWTON_MAX_ITER,
        }
    }
}

/// Discrete pressure equation of one conservative step.
#[derive(Debug, Clone, PartialEq)]
pub struct EllipticSystem {
    pub nx: usize,
    pub ny: usize,
    pub rhs: Vec<f64>,
    /// `dt^2 lambda / (4 dx^2)`.
    pub coef_x: f64,
    /// `dt^2 lambda / (4 dy^2)`; zero in 1D.
    pub coef_y: f64,
    /// Explicit momentum predictor before the implicit pressure gradient.
    pub phi1: Vec<f64>,
    pub phi2: Vec<f64>,
    /// `dt lambda / (2 dx)` and `dt lambda / (2 dy)` for the momentum recovery.
    pub grad_x: f64,
    pub grad_y: f64,
    /// Largest cell speed used in the diffusion coefficients.
    pub max_speed: f64,
}

/// Cell fluxes `F = (c q1^2/rho + lambda p0, c q1 q2/rho)` and `G = (c q1 q2/rho, c q2^2/rho + lambda p0)`.
struct CellFluxes {
    f1: Vec<f64>,
    f2: Vec<f64>,
    g1: Vec<f64>,
    g2: Vec<f64>,
}

fn cell_fluxes(
    state: &FieldState,
    params: &ModelParams,
    p0: impl Fn(f64) -> Result<f64, crate::error::PressureError>,
) -> Result<CellFluxes, SchemeError> {
    let n = state.rho.len();
    let mut out = CellFluxes {
        f1: vec![0.0; n],
        f2: vec![0.0; n],
        g1: vec![0.0; n],
        g2: vec![0.0; n],
    };
    for k in 0..n {
        let rho = state.rho[k].max(RHO_MIN);
        let (a, b) = (state.q1[k], state.q2[k]);
        let p = params.lambda * p0(rho)?;
        let ab = params.c * a * b / rho;
        out.f1[k] = params.c * a * a / rho + p;
        out.f2[k] = ab;
        out.g1[k] = ab;
        out.g2[k] = params.c * b * b / rho + p;
    }
    Ok(out)
}

/// Rusanov face fluxes of the momentum, x-faces stored at the left cell, y-faces at the lower cell.
struct FaceFluxes {
    fx1: Vec<f64>,
    fx2: Vec<f64>,
    gy1: Vec<f64>,
    gy2: Vec<f64>,
}

fn face_fluxes(grid: &Grid, state: &FieldState, cf: &CellFluxes, cx: &[f64], cy: &[f64]) -> FaceFluxes {
    let n = grid.len();
    let mut out = FaceFluxes {
        fx1: vec![0.0; n],
        fx2: vec![0.0; n],
        gy1: vec![0.0; n],
        gy2: vec![0.0; n],
    };
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let k = grid.idx(i, j);
            let e = grid.offset(i, j, 1, 0);
            let nn = grid.offset(i, j, 0, 1);
            out.fx1[k] = 0.5 * (cf.f1[e] + cf.f1[k]) - 0.5 * cx[k] * (state.q1[e] - state.q1[k]);
            out.fx2[k] = 0.5 * (cf.f2[e] + cf.f2[k]) - 0.5 * cx[k] * (state.q2[e] - state.q2[k]);
            out.gy1[k] = 0.5 * (cf.g1[nn] + cf.g1[k]) - 0.5 * cy[k] * (state.q1[nn] - state.q1[k]);
            out.gy2[k] = 0.5 * (cf.g2[nn] + cf.g2[k]) - 0.5 * cy[k] * (state.q2[nn] - state.q2[k]);
        }
    }
    out
}

fn speeds_or_error(
    state: &FieldState,
    params: &ModelParams,
    pressure: &PressureModel,
) -> Result<Vec<f64>, SchemeError> {
    cell_speeds(state, params, pressure, SpeedMode::Split).map_err(|(_, e)| SchemeError::Pressure(e))
}

/// Two-dimensional assembly, term by term.
pub fn assemble_elliptic(
    grid: &Grid,
    state: &FieldState,
    params: &ModelParams,
    pressure: &PressureModel,
) -> Result<EllipticSystem, SchemeError> {
    state.check_shape(grid)?;
    let (dt, dx, dy) = (params.dt, grid.dx, grid.dy);
    let speeds = speeds_or_error(state, params, pressure)?;
    let (cx, cy) = face_coeffs(grid, &speeds);
    let cf = cell_fluxes(state, params, |r| pressure.split_p0(r))?;
    let ff = face_fluxes(grid, state, &cf, &cx, &cy);

    let n = grid.len();
    let mut rhs = vec![0.0; n];
    let mut phi1 = vec![0.0; n];
    let mut phi2 = vec![0.0; n];
    let (rho, q1, q2) = (&state.rho, &state.q1, &state.q2);
    let half_dt2 = 0.5 * dt * dt;
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let k = grid.idx(i, j);
            let at = |di: isize, dj: isize| grid.offset(i, j, di, dj);
            let (e, w, nn, s) = (at(1, 0), at(-1, 0), at(0, 1), at(0, -1));

            let div_q = (q1[e] - q1[w]) / (2.0 * dx) + (q2[nn] - q2[s]) / (2.0 * dy);
            let f_xx = ff.fx1[e] - ff.fx1[k] - ff.fx1[w] + ff.fx1[at(-2, 0)];
            let g_xy = ff.gy1[e] - ff.gy1[at(1, -1)] - ff.gy1[w] + ff.gy1[at(-1, -1)];
            let f_yx = ff.fx2[nn] - ff.fx2[at(-1, 1)] - ff.fx2[s] + ff.fx2[at(-1, -1)];
            let g_yy = ff.gy2[nn] - ff.gy2[k] - ff.gy2[s] + ff.gy2[at(0, -2)];
            let second = f_xx / (dx * dx) + g_xy / (dx * dy) + f_yx / (dx * dy) + g_yy / (dy * dy);
            let diff_x = cx[k] * (rho[e] - rho[k]) - cx[w] * (rho[k] - rho[w]);
            let diff_y = cy[k] * (rho[nn] - rho[k]) - cy[s] * (rho[k] - rho[s]);

            rhs[k] = rho[k] - dt * div_q
                + half_dt2 * second
                + dt / (2.0 * dx) * diff_x
                + dt / (2.0 * dy) * diff_y;

            phi1[k] = q1[k] - dt / dx * (ff.fx1[k] - ff.fx1[w]) - dt / dy * (ff.gy1[k] - ff.gy1[s]);
            phi2[k] = q2[k] - dt / dx * (ff.fx2[k] - ff.fx2[w]) - dt / dy * (ff.gy2[k] - ff.gy2[s]);
        }
    }
    let lam = params.lambda;
    Ok(EllipticSystem {
        nx: grid.nx,
        ny: grid.ny,
        rhs,
        coef_x: dt * dt * lam / (4.0 * dx * dx),
        coef_y: if grid.ny > 2 { dt * dt * lam / (4.0 * dy * dy) } else { 0.0 },
        phi1,
        phi2,
        grad_x: dt * lam / (2.0 * dx),
        grad_y: if grid.ny > 1 { dt * lam / (2.0 * dy) } else { 0.0 },
        max_speed: speeds.iter().cloned().fold(0.0, f64::max),
    })
}

/// One-dimensional assembly on a single row. Both momentum components are
/// carried; the transverse one is transported without a pressure gradient.
pub fn assemble_elliptic_1d(
    grid: &Grid,
    state: &FieldState,
    params: &ModelParams,
    pressure: &PressureModel,
) -> Result<EllipticSystem, SchemeError> {
    state.check_shape(grid)?;
    if !grid.is_1d() {
        return Err(SchemeError::Config(format!(
            "one-dimensional assembly needs ny = 1, got ny = {}",
            grid.ny
        )));
    }
    let m = grid.nx;
    let (dt, dx) = (params.dt, grid.dx);
    let speeds = speeds_or_error(state, params, pressure)?;
    let wrap = |j: usize, d: isize| crate::grid::wrap_index(j as isize + d, m);
    let c_half: Vec<f64> = (0..m).map(|j| speeds[j].max(speeds[wrap(j, 1)])).collect();

    let (rho, q, qt) = (&state.rho, &state.q1, &state.q2);
    let mut flux = vec![0.0; m];
    let mut flux_t = vec![0.0; m];
    {
        let cell = |j: usize| -> Result<(f64, f64), SchemeError> {
            let r = rho[j].max(RHO_MIN);
            Ok((
                params.c * q[j] * q[j] / r + params.lambda * pressure.split_p0(r)?,
                params.c * q[j] * qt[j] / r,
            ))
        };
        let cells: Vec<(f64, f64)> = (0..m).map(cell).collect::<Result<_, _>>()?;
        for j in 0..m {
            let jp = wrap(j, 1);
            flux[j] = 0.5 * (cells[j].0 + cells[jp].0) - 0.5 * c_half[j] * (q[jp] - q[j]);
            flux_t[j] = 0.5 * (cells[j].1 + cells[jp].1) - 0.5 * c_half[j] * (qt[jp] - qt[j]);
        }
    }

    let mut rhs = vec![0.0; m];
    let mut phi1 = vec![0.0; m];
    let mut phi2 = vec![0.0; m];
    for j in 0..m {
        let (jp, jm, jmm) = (wrap(j, 1), wrap(j, -1), wrap(j, -2));
        rhs[j] = rho[j] - dt / (2.0 * dx) * (q[jp] - q[jm])
            + dt / (2.0 * dx) * (c_half[j] * (rho[jp] - rho[j]) - c_half[jm] * (rho[j] - rho[jm]))
            + dt * dt / (2.0 * dx * dx) * (flux[jp] - flux[j] - flux[jm] + flux[jmm]);
        phi1[j] = q[j] - dt / dx * (flux[j] - flux[jm]);
        phi2[j] = qt[j] - dt / dx * (flux_t[j] - flux_t[jm]);
    }
    Ok(EllipticSystem {
        nx: m,
        ny: 1,
        rhs,
        coef_x: dt * dt * params.lambda / (4.0 * dx * dx),
        coef_y: 0.0,
        phi1,
        phi2,
        grad_x: dt * params.lambda / (2.0 * dx),
        grad_y: 0.0,
        max_speed: speeds.iter().cloned().fold(0.0, f64::max),
    })
}

impl EllipticSystem {
    pub fn len(&self) -> usize {
        self.rhs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rhs.is_empty()
    }

    /// `out = a_x L_x v + a_y L_y v`.
    pub fn apply_laplacian(&self, v: &[f64], out: &mut [f64]) {
        let (nx, ny) = (self.nx, self.ny);
        for j in 0..ny {
            let row = j * nx;
            for i in 0..nx {
                let ip = if i + 2 >= nx { i + 2 - nx } else { i + 2 };
                let im = if i < 2 { i + nx - 2 } else { i - 2 };
                let k = row + i;
                out[k] = self.coef_x * (v[row + ip] - 2.0 * v[k] + v[row + im]);
            }
        }
        if self.coef_y != 0.0 {
            for j in 0..ny {
                let jp = (j + 2) % ny;
                let jm = (j + ny - 2) % ny;
                for i in 0..nx {
                    let k = j * nx + i;
                    out[k] += self.coef_y * (v[jp * nx + i] - 2.0 * v[k] + v[jm * nx + i]);
                }
            }
        }
    }

    /// Diagonal entry of `-(a_x L_x + a_y L_y)`.
    fn laplacian_diagonal(&self) -> f64 {
        2.0 * self.coef_x + if self.ny > 2 { 2.0 * self.coef_y } else { 0.0 }
    }

    /// Pointwise residual `rho(p1) - a L p1 - rhs`.
    pub fn residual(&self, rho: &[f64], p1: &[f64], out: &mut [f64]) {
        self.apply_laplacian(p1, out);
        for k in 0..out.len() {
            out[k] = rho[k] - out[k] - self.rhs[k];
        }
    }

    /// Momentum after the implicit pressure gradient of `p1`.
    pub fn recover_momentum(&self, p1: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (nx, ny) = (self.nx, self.ny);
        let mut q1 = self.phi1.clone();
        let mut q2 = self.phi2.clone();
        for j in 0..ny {
            let (jp, jm) = ((j + 1) % ny, (j + ny - 1) % ny);
            for i in 0..nx {
                let (ip, im) = ((i + 1) % nx, (i + nx - 1) % nx);
                let k = j * nx + i;
                q1[k] -= self.grad_x * (p1[j * nx + ip] - p1[j * nx + im]);
                if self.grad_y != 0.0 {
                    q2[k] -= self.grad_y * (p1[jp * nx + i] - p1[jm * nx + i]);
                }
            }
        }
        (q1, q2)
    }
}

/// Result of a Newton solve.
#[derive(Debug, Clone, PartialEq)]
pub struct NewtonSolution {
    pub p1: Vec<f64>,
    /// Densities `rho(p1)`, each strictly below `rho_star`.
    pub rho: Vec<f64>,
    pub iterations: usize,
    pub linear_iterations: usize,
    /// Max-norm residual after each iteration, starting with the initial guess.
    pub residual_history: Vec<f64>,
}

impl NewtonSolution {
    pub fn residual(&self) -> f64 {
        *self.residual_history.last().unwrap_or(&f64::NAN)
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn densities(pressure: &PressureModel, p1: &[f64], rho: &mut [f64]) -> Result<(), SchemeError> {
    for (r, &p) in rho.iter_mut().zip(p1) {
        *r = pressure.invert_p1(p)?;
    }
    Ok(())
}

/// Newton iterations for `p1`, starting from `initial_guess`.
pub fn newton_elliptic(
    system: &EllipticSystem,
    pressure: &PressureModel,
    initial_guess: &[f64],
) -> Result<NewtonSolution, SchemeError> {
    newton_elliptic_with(system, pressure, initial_guess, SolverOptions::default())
}

pub fn newton_elliptic_with(
    system: &EllipticSystem,
    pressure: &PressureModel,
    initial_guess: &[f64],
    options: SolverOptions,
) -> Result<NewtonSolution, SchemeError> {
    let n = system.len();
    if initial_guess.len() != n {
        return Err(crate::error::GridError::ShapeMismatch {
            expected: n,
            got: initial_guess.len(),
        }
        .into());
    }
    let tol = NEWTON_TOL * (1.0 + max_abs(&system.rhs));
    let lap_diag = system.laplacian_diagonal();

    let mut p1: Vec<f64> = initial_guess.iter().map(|&v| v.max(0.0)).collect();
    let mut rho = vec![0.0; n];
    densities(pressure, &p1, &mut rho)?;
    let mut res = vec![0.0; n];
    system.residual(&rho, &p1, &mut res);
    let mut rnorm = max_abs(&res);
    let mut history = vec![rnorm];

    let mut diag = vec![0.0; n];
    let mut delta = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut trial_rho = vec![0.0; n];
    let mut trial_res = vec![0.0; n];
    let mut workspace = CgWorkspace::new(n);
    let mut iterations = 0;
    let mut linear_iterations = 0;
    let mut clamped_cell: Option<usize> = None;
    let mut polish = 0;
    let mut previous_norm = f64::NAN;

    while iterations < options.max_newton {
        if rnorm <= tol {
            if polish >= NEWTON_POLISH || rnorm == 0.0 {
                break;
            }
            polish += 1;
        }
        iterations += 1;
        for k in 0..n {
            let r = rho[k].max(RHO_MIN);
            diag[k] = 1.0 / pressure.dp1(r)?;
        }
        let forcing = if options.inexact && rnorm > tol {
            let ratio = rnorm / previous_norm;
            let eta = if ratio.is_finite() { 0.9 * ratio * ratio } else { CG_MAX_FORCING };
            eta.min(CG_MAX_FORCING).max(0.1 * tol / rnorm).max(CG_REL_TOL)
        } else {
            CG_REL_TOL
        };
        previous_norm = rnorm;
        let its = conjugate_gradient(
            system,
            &diag,
            lap_diag,
            &res,
            &mut delta,
            options.jacobi,
            forcing,
            &mut workspace,
        );
        linear_iterations += its;

        clamped_cell = None;
        for k in 0..n {
            let v = p1[k] - delta[k];
            trial[k] = if v < 0.0 {
                clamped_cell.get_or_insert(k);
                0.1 * p1[k]
            } else {
                v
            };
        }
        densities(pressure, &trial, &mut trial_rho)?;
        system.residual(&trial_rho, &trial, &mut trial_res);
        let tnorm = max_abs(&trial_res);
        if !tnorm.is_finite() {
            return Err(SchemeError::NewtonDivergence {
                iterations,
                residual: tnorm,
            });
        }
        if rnorm <= tol && tnorm >= rnorm {
            // Polishing no longer improves the solution.
            break;
        }
        std::mem::swap(&mut p1, &mut trial);
        std::mem::swap(&mut rho, &mut trial_rho);
        std::mem::swap(&mut res, &mut trial_res);
        rnorm = tnorm;
        history.push(rnorm);
    }

    if rnorm > tol {
        if let Some(cell) = clamped_cell {
            return Err(SchemeError::NegativePressure { cell, residual: rnorm });
        }
        return Err(SchemeError::NewtonDivergence {
            iterations,
            residual: rnorm,
        });
    }
    Ok(NewtonSolution {
        p1,
        rho,
        iterations,
        linear_iterations,
        residual_history: history,
    })
}

struct CgWorkspace {
    r: Vec<f64>,
    z: Vec<f64>,
    p: Vec<f64>,
    ap: Vec<f64>,
}

impl CgWorkspace {
    fn new(n: usize) -> Self {
        Self {
            r: vec![0.0; n],
            z: vec![0.0; n],
            p: vec![0.0; n],
            ap: vec![0.0; n],
        }
    }
}

fn jacobian_apply(system: &EllipticSystem, diag: &[f64], v: &[f64], out: &mut [f64]) {
    system.apply_laplacian(v, out);
    for k in 0..out.len() {
        out[k] = diag[k] * v[k] - out[k];
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `(diag - a L) x = b` by (optionally Jacobi-preconditioned) CG from `x = 0`.
fn conjugate_gradient(
    system: &EllipticSystem,
    diag: &[f64],
    lap_diag: f64,
    b: &[f64],
    x: &mut [f64],
    jacobi: bool,
    rel_tol: f64,
    ws: &mut CgWorkspace,
) -> usize {
    let n = b.len();
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return 0;
    }
    let precond = |r: &[f64], z: &mut [f64]| {
        for k in 0..n {
            z[k] = if jacobi { r[k] / (diag[k] + lap_diag) } else { r[k] };
        }
    };
    x.iter_mut().for_each(|v| *v = 0.0);
    ws.r.copy_from_slice(b);
    precond(&ws.r, &mut ws.z);
    ws.p.copy_from_slice(&ws.z);
    let mut rz = dot(&ws.r, &ws.z);
    let target = rel_tol * bnorm;
    for it in 1..=CG_MAX_ITER {
        jacobian_apply(system, diag, &ws.p, &mut ws.ap);
        let pap = dot(&ws.p, &ws.ap);
        if !(pap > 0.0) {
            return it;
        }
        let alpha = rz / pap;
        for k in 0..n {
            x[k] += alpha * ws.p[k];
            ws.r[k] -= alpha * ws.ap[k];
        }
        if dot(&ws.r, &ws.r).sqrt() <= target {
            return it;
        }
        precond(&ws.r, &mut ws.z);
        let rz_new = dot(&ws.r, &ws.z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            ws.p[k] = ws.z[k] + beta * ws.p[k];
        }
    }
    CG_MAX_ITER
}
