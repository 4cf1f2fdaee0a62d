//! Two-species crowd model with a shared congestion pressure.
//!
//! Right-going (`+`) and left-going (`-`) pedestrians each carry a density,
//! a momentum and a desired velocity `w`. Both momentum equations feel the
//! pressure of the total density `rho = rho_plus + rho_minus`, so the total
//! momentum sees twice the pressure and the implicit pressure equation has a
//! doubled Laplacian. The relaxation step pulls `q` toward `rho w` over the
//! time scale `beta`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{GridError, SchemeError};
use crate::grid::{Grid, ModelParams, RHO_MIN};
use crate::pressure::PressureModel;
use crate::scheme::{congested_fraction, newton_elliptic, EllipticSystem, StepReport};

/// Side length, in cells, of the square blocks carrying one random perturbation.
pub const BLOCK: usize = 5;
/// Half-width of the uniform perturbation of `rho_plus`.
pub const PERTURBATION: f64 = 0.19;
/// Total initial density.
pub const TOTAL_DENSITY: f64 = 0.8;

/// Fields of one pedestrian species.
#[derive(Debug, Clone, PartialEq)]
pub struct Species {
    pub rho: Vec<f64>,
    pub q1: Vec<f64>,
    pub q2: Vec<f64>,
    pub w1: Vec<f64>,
    pub w2: Vec<f64>,
}

impl Species {
    fn at_rest(n: usize, rho: f64, w: (f64, f64)) -> Self {
        Self {
            rho: vec![rho; n],
            q1: vec![0.0; n],
            q2: vec![0.0; n],
            w1: vec![w.0; n],
            w2: vec![w.1; n],
        }
    }

    pub fn mass(&self) -> f64 {
        self.rho.iter().sum()
    }

    fn fields(&self) -> [&Vec<f64>; 5] {
        [&self.rho, &self.q1, &self.q2, &self.w1, &self.w2]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoFluidState {
    pub plus: Species,
    pub minus: Species,
    pub time: f64,
}

impl TwoFluidState {
    /// Both species at rest with uniform densities and desired velocities `+e_x` / `-e_x`.
    pub fn at_rest(grid: &Grid, rho_plus: f64, rho_minus: f64) -> Self {
        let n = grid.len();
        Self {
            plus: Species::at_rest(n, rho_plus, (1.0, 0.0)),
            minus: Species::at_rest(n, rho_minus, (-1.0, 0.0)),
            time: 0.0,
        }
    }

    pub fn total_density(&self) -> Vec<f64> {
        self.plus.rho.iter().zip(&self.minus.rho).map(|(a, b)| a + b).collect()
    }

    pub fn check_shape(&self, grid: &Grid) -> Result<(), GridError> {
        let n = grid.len();
        for v in self.plus.fields().into_iter().chain(self.minus.fields()) {
            if v.len() != n {
                return Err(GridError::ShapeMismatch {
                    expected: n,
                    got: v.len(),
                });
            }
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.plus
            .fields()
            .into_iter()
            .chain(self.minus.fields())
            .all(|v| v.iter().all(|x| x.is_finite()))
    }

    /// Mirror image: species swapped and `x` reflected.
    pub fn mirrored(&self, grid: &Grid) -> Self {
        let flip = |s: &Species| {
            let mut out = s.clone();
            for j in 0..grid.ny {
                for i in 0..grid.nx {
                    let (a, b) = (grid.idx(i, j), grid.idx(grid.nx - 1 - i, j));
                    out.rho[a] = s.rho[b];
                    out.q1[a] = -s.q1[b];
                    out.q2[a] = s.q2[b];
                    out.w1[a] = -s.w1[b];
                    out.w2[a] = s.w2[b];
                }
            }
            out
        };
        Self {
            plus: flip(&self.minus),
            minus: flip(&self.plus),
            time: self.time,
        }
    }
}

/// Checks the crowd-model constraints on the parameters (`c = 1`, `lambda = 1`).
pub fn validate_params(params: &ModelParams) -> Result<(), SchemeError> {
    if params.c != 1.0 {
        return Err(SchemeError::Config(format!("the crowd model requires c = 1, got c = {}", params.c)));
    }
    if params.lambda != 1.0 {
        return Err(SchemeError::Config(format!(
            "the crowd model requires lambda = 1, got lambda = {}",
            params.lambda
        )));
    }
    params.validate()?;
    Ok(())
}

/// Rest state with total density 0.8 and a block-constant random perturbation of
/// `rho_plus` on blocks whose center lies in `[1/3, 2/3]^2`.
///
/// Blocks are `5 x 5` cells aligned with the grid, drawn in row-major block
/// order from a ChaCha8 stream seeded with `seed`.
pub fn init_crowd(grid: &Grid, seed: u64) -> Result<TwoFluidState, GridError> {
    if !grid.nx.is_multiple_of(BLOCK) || !grid.ny.is_multiple_of(BLOCK) {
        return Err(GridError::BadParameter {
            name: "grid",
            reason: format!(
                "crowd perturbation needs cell counts divisible by {BLOCK}, got {} x {}",
                grid.nx, grid.ny
            ),
        });
    }
    let half = 0.5 * TOTAL_DENSITY;
    let mut state = TwoFluidState::at_rest(grid, half, half);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (bx, by) = (grid.nx / BLOCK, grid.ny / BLOCK);
    let (lo, hi) = (1.0 / 3.0, 2.0 / 3.0);
    for bj in 0..by {
        let yc = (bj as f64 + 0.5) * BLOCK as f64 * grid.dy;
        for bi in 0..bx {
            let xc = (bi as f64 + 0.5) * BLOCK as f64 * grid.dx;
            if !(xc >= lo && xc <= hi && yc >= lo && yc <= hi) {
                continue;
            }
            let r: f64 = rng.gen_range(-PERTURBATION..=PERTURBATION);
            let rho_plus = half + r;
            let rho_minus = TOTAL_DENSITY - rho_plus;
            assert!(rho_minus > 0.0 && rho_plus > 0.0);
            for j in bj * BLOCK..(bj + 1) * BLOCK {
                for i in bi * BLOCK..(bi + 1) * BLOCK {
                    let k = grid.idx(i, j);
                    state.plus.rho[k] = rho_plus;
                    state.minus.rho[k] = rho_minus;
                }
            }
        }
    }
    Ok(state)
}

/// Per-species explicit data needed after the pressure solve.
struct SpeciesPredictor {
    phi1: Vec<f64>,
    phi2: Vec<f64>,
}

fn species_predictor(
    grid: &Grid,
    s: &Species,
    p0: &[f64],
    cx: &[f64],
    cy: &[f64],
    dt: f64,
) -> SpeciesPredictor {
    let n = grid.len();
    let mut f = [vec![0.0; n], vec![0.0; n]];
    let mut g = [vec![0.0; n], vec![0.0; n]];
    for k in 0..n {
        let r = s.rho[k].max(RHO_MIN);
        let (a, b) = (s.q1[k], s.q2[k]);
        f[0][k] = a * a / r + p0[k];
        f[1][k] = a * b / r;
        g[0][k] = a * b / r;
        g[1][k] = b * b / r + p0[k];
    }
    let q = [&s.q1, &s.q2];
    let mut phi = [s.q1.clone(), s.q2.clone()];
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let k = grid.idx(i, j);
            let (e, w) = (grid.offset(i, j, 1, 0), grid.offset(i, j, -1, 0));
            let (nn, so) = (grid.offset(i, j, 0, 1), grid.offset(i, j, 0, -1));
            for m in 0..2 {
                let east = 0.5 * (f[m][k] + f[m][e]) - 0.5 * cx[k] * (q[m][e] - q[m][k]);
                let west = 0.5 * (f[m][w] + f[m][k]) - 0.5 * cx[w] * (q[m][k] - q[m][w]);
                let north = 0.5 * (g[m][k] + g[m][nn]) - 0.5 * cy[k] * (q[m][nn] - q[m][k]);
                let south = 0.5 * (g[m][so] + g[m][k]) - 0.5 * cy[so] * (q[m][k] - q[m][so]);
                phi[m][k] -= dt / grid.dx * (east - west) + dt / grid.dy * (north - south);
            }
        }
    }
    let [phi1, phi2] = phi;
    SpeciesPredictor { phi1, phi2 }
}

/// Implicit-flux continuity update of one species, with upwind transport of `rho w`
/// along the same mass fluxes.
fn species_transport(grid: &Grid, s: &Species, q1: &[f64], q2: &[f64], cx: &[f64], cy: &[f64], dt: f64) -> Species {
    let n = grid.len();
    // Mass fluxes on x-faces (stored at the left cell) and y-faces (lower cell).
    let mut fx = vec![0.0; n];
    let mut fy = vec![0.0; n];
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let k = grid.idx(i, j);
            let (e, nn) = (grid.offset(i, j, 1, 0), grid.offset(i, j, 0, 1));
            fx[k] = 0.5 * (q1[k] + q1[e]) - 0.5 * cx[k] * (s.rho[e] - s.rho[k]);
            fy[k] = 0.5 * (q2[k] + q2[nn]) - 0.5 * cy[k] * (s.rho[nn] - s.rho[k]);
        }
    }
    let upwind = |flux: f64, here: f64, there: f64| if flux >= 0.0 { flux * here } else { flux * there };
    let mut out = s.clone();
    out.q1 = q1.to_vec();
    out.q2 = q2.to_vec();
    let (lx, ly) = (dt / grid.dx, dt / grid.dy);
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let k = grid.idx(i, j);
            let (e, w) = (grid.offset(i, j, 1, 0), grid.offset(i, j, -1, 0));
            let (nn, so) = (grid.offset(i, j, 0, 1), grid.offset(i, j, 0, -1));
            let rho_new = s.rho[k] - lx * (fx[k] - fx[w]) - ly * (fy[k] - fy[so]);
            let mut rw = [0.0; 2];
            for (m, wv) in [&s.w1, &s.w2].into_iter().enumerate() {
                let out_e = upwind(fx[k], wv[k], wv[e]);
                let in_w = upwind(fx[w], wv[w], wv[k]);
                let out_n = upwind(fy[k], wv[k], wv[nn]);
                let in_s = upwind(fy[so], wv[so], wv[k]);
                rw[m] = s.rho[k] * wv[k] - lx * (out_e - in_w) - ly * (out_n - in_s);
            }
            let r = rho_new.max(RHO_MIN);
            out.rho[k] = r;
            out.w1[k] = rw[0] / r;
            out.w2[k] = rw[1] / r;
        }
    }
    out
}

/// Semi-implicit conservative step of the two-species system.
pub fn twofluid_conservative_step(
    grid: &Grid,
    state: &TwoFluidState,
    params: &ModelParams,
    pressure: &PressureModel,
) -> Result<(TwoFluidState, StepReport), SchemeError> {
    validate_params(params)?;
    state.check_shape(grid)?;
    let n = grid.len();
    let dt = params.dt;
    let rho = state.total_density();

    let mut p0 = vec![0.0; n];
    let mut speed = vec![0.0; n];
    for k in 0..n {
        let r = rho[k].max(RHO_MIN);
        p0[k] = pressure.split_p0(r)?;
        let sound = (2.0 * pressure.dp0(r)?).abs().sqrt();
        let mut u: f64 = 0.0;
        for s in [&state.plus, &state.minus] {
            let rs = s.rho[k].max(RHO_MIN);
            u = u.max((s.q1[k] / rs).abs()).max((s.q2[k] / rs).abs());
        }
        speed[k] = u + sound;
    }
    let (cx, cy) = crate::scheme::speeds::face_coeffs(grid, &speed);

    let pp = species_predictor(grid, &state.plus, &p0, &cx, &cy, dt);
    let pm = species_predictor(grid, &state.minus, &p0, &cx, &cy, dt);
    let phi1: Vec<f64> = pp.phi1.iter().zip(&pm.phi1).map(|(a, b)| a + b).collect();
    let phi2: Vec<f64> = pp.phi2.iter().zip(&pm.phi2).map(|(a, b)| a + b).collect();

    let mut rhs = vec![0.0; n];
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let k = grid.idx(i, j);
            let (e, w) = (grid.offset(i, j, 1, 0), grid.offset(i, j, -1, 0));
            let (nn, so) = (grid.offset(i, j, 0, 1), grid.offset(i, j, 0, -1));
            let diff_x = cx[k] * (rho[e] - rho[k]) - cx[w] * (rho[k] - rho[w]);
            let diff_y = cy[k] * (rho[nn] - rho[k]) - cy[so] * (rho[k] - rho[so]);
            rhs[k] = rho[k] - dt / (2.0 * grid.dx) * (phi1[e] - phi1[w]) - dt / (2.0 * grid.dy) * (phi2[nn] - phi2[so])
                + dt / (2.0 * grid.dx) * diff_x
                + dt / (2.0 * grid.dy) * diff_y;
        }
    }
    let system = EllipticSystem {
        nx: grid.nx,
        ny: grid.ny,
        rhs,
        coef_x: 2.0 * dt * dt / (4.0 * grid.dx * grid.dx),
        coef_y: if grid.ny > 2 { 2.0 * dt * dt / (4.0 * grid.dy * grid.dy) } else { 0.0 },
        phi1,
        phi2,
        grad_x: dt / (2.0 * grid.dx),
        grad_y: if grid.ny > 1 { dt / (2.0 * grid.dy) } else { 0.0 },
        max_speed: speed.iter().cloned().fold(0.0, f64::max),
    };
    let guess: Vec<f64> = rho
        .iter()
        .map(|&r| pressure.split_p1(r.max(RHO_MIN)))
        .collect::<Result<_, _>>()?;
    let sol = newton_elliptic(&system, pressure, &guess)?;
    let zero = EllipticSystem {
        phi1: vec![0.0; n],
        phi2: vec![0.0; n],
        ..system.clone()
    };
    let (gx, gy) = zero.recover_momentum(&sol.p1);

    let advance = |s: &Species, pred: &SpeciesPredictor| {
        let q1: Vec<f64> = pred.phi1.iter().zip(&gx).map(|(a, b)| a + b).collect();
        let q2: Vec<f64> = pred.phi2.iter().zip(&gy).map(|(a, b)| a + b).collect();
        species_transport(grid, s, &q1, &q2, &cx, &cy, dt)
    };
    let next = TwoFluidState {
        plus: advance(&state.plus, &pp),
        minus: advance(&state.minus, &pm),
        time: state.time + dt,
    };
    let total = next.total_density();
    let report = StepReport {
        newton_iterations: sol.iterations,
        inner_linear_iterations: sol.linear_iterations,
        newton_residual: sol.residual(),
        max_char_speed: system.max_speed,
        cfl_explicit: dt * system.max_speed / grid.min_spacing(),
        congested_fraction: congested_fraction(&total, pressure.rho_star(), params.congestion_tol),
        lattice_oscillation: crate::scheme::lattice_oscillation(grid, &total),
    };
    Ok((next, report))
}

/// Exact relaxation `q <- rho w + (q - rho w) exp(-dt / beta)`.
pub fn twofluid_relaxation_step(state: &TwoFluidState, params: &ModelParams) -> TwoFluidState {
    let x = params.dt / params.beta;
    let decay = if x > 700.0 { 0.0 } else { (-x).exp() };
    let relax = |s: &Species| {
        let mut out = s.clone();
        for k in 0..s.rho.len() {
            let (t1, t2) = (s.rho[k] * s.w1[k], s.rho[k] * s.w2[k]);
            out.q1[k] = t1 + (s.q1[k] - t1) * decay;
            out.q2[k] = t2 + (s.q2[k] - t2) * decay;
        }
        out
    };
    TwoFluidState {
        plus: relax(&state.plus),
        minus: relax(&state.minus),
        time: state.time,
    }
}

/// Conservative step followed by relaxation.
pub fn twofluid_step(
    grid: &Grid,
    state: &TwoFluidState,
    params: &ModelParams,
    pressure: &PressureModel,
) -> Result<(TwoFluidState, StepReport), SchemeError> {
    let (half, report) = twofluid_conservative_step(grid, state, params, pressure)?;
    Ok((twofluid_relaxation_step(&half, params), report))
}

/// Mean, variance, minimum and maximum of a field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldStats {
    pub mean: f64,
    pub variance: f64,
    pub min: f64,
    pub max: f64,
}

impl FieldStats {
    pub fn of(v: &[f64]) -> Self {
        let n = v.len().max(1) as f64;
        let mean = v.iter().sum::<f64>() / n;
        let variance = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let (min, max) = v
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        Self { mean, variance, min, max }
    }
}

/// `D rho = rho_plus - rho_minus` and `D q1 = q_plus,1 + q_minus,1` with summaries.
#[derive(Debug, Clone, PartialEq)]
pub struct LaneDiagnostics {
    pub drho: Vec<f64>,
    pub dq1: Vec<f64>,
    pub drho_stats: FieldStats,
    pub dq1_stats: FieldStats,
}

impl LaneDiagnostics {
    /// Pearson correlation between `D q1` and `D rho` over all cells.
    pub fn correlation(&self) -> f64 {
        pearson(&self.dq1, &self.drho)
    }
}

pub fn lane_diagnostics(state: &TwoFluidState) -> LaneDiagnostics {
    let drho: Vec<f64> = state.plus.rho.iter().zip(&state.minus.rho).map(|(a, b)| a - b).collect();
    let dq1: Vec<f64> = state.plus.q1.iter().zip(&state.minus.q1).map(|(a, b)| a + b).collect();
    let drho_stats = FieldStats::of(&drho);
    let dq1_stats = FieldStats::of(&dq1);
    LaneDiagnostics {
        drho,
        dq1,
        drho_stats,
        dq1_stats,
    }
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let sa = FieldStats::of(a);
    let sb = FieldStats::of(b);
    let n = a.len().max(1) as f64;
    let cov = a.iter().zip(b).map(|(x, y)| (x - sa.mean) * (y - sb.mean)).sum::<f64>() / n;
    let denom = (sa.variance * sb.variance).sqrt();
    if denom == 0.0 {
        0.0
    } else {
        cov / denom
    }
}
