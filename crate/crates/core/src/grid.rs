//! Grid geometry, model parameters and cell-centered field storage.
//!
//! All grids are periodic in both directions. Fields are stored row-major
//! (`j * nx + i`, with `i` along x) and neighbors are reached by index
//! wrapping, so there are no ghost layers.

use crate::error::GridError;

/// Density floor applied after every step.
pub const RHO_MIN: f64 = 1e-8;

/// Physical and numerical constants of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// Coefficient of the velocity transport term.
    pub c: f64,
    /// Pressure coupling.
    pub lambda: f64,
    /// Pressure stiffness.
    pub epsilon: f64,
    /// Relaxation time of the unit-norm constraint.
    pub beta: f64,
    /// Pressure exponent.
    pub gamma: f64,
    /// Congestion density.
    pub rho_star: f64,
    /// Background pressure strength, only used with `use_background`.
    pub kappa: f64,
    pub use_background: bool,
    pub dt: f64,
    pub dx: f64,
    pub dy: f64,
    pub t_end: f64,
    pub seed: u64,
    /// Cells with `rho >= rho_star - congestion_tol` count as congested.
    pub congestion_tol: f64,
}

impl Default for ModelParams {
    /// The cluster-collision parameter set: `c = 1`, no background pressure.
    fn default() -> Self {
        Self {
            c: 1.0,
            lambda: 1.0,
            epsilon: 1e-4,
            beta: 1e-7,
            gamma: 2.0,
            rho_star: 1.0,
            kappa: 0.0,
            use_background: false,
            dt: 5e-4,
            dx: 5e-3,
            dy: 5e-3,
            t_end: 0.1,
            seed: 0,
            congestion_tol: 0.02,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<(), GridError> {
        fn positive(name: &'static str, v: f64) -> Result<(), GridError> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(GridError::BadParameter {
                    name,
                    reason: format!("must be finite and > 0, got {v}"),
                })
            }
        }
        positive("epsilon", self.epsilon)?;
        positive("beta", self.beta)?;
        positive("gamma", self.gamma)?;
        positive("rho_star", self.rho_star)?;
        positive("lambda", self.lambda)?;
        positive("dt", self.dt)?;
        positive("dx", self.dx)?;
        positive("dy", self.dy)?;
        positive("congestion_tol", self.congestion_tol)?;
        if !self.c.is_finite() {
            return Err(GridError::BadParameter {
                name: "c",
                reason: "must be finite".into(),
            });
        }
        if !(self.kappa.is_finite() && self.kappa >= 0.0) {
            return Err(GridError::BadParameter {
                name: "kappa",
                reason: format!("must be >= 0, got {}", self.kappa),
            });
        }
        if !self.use_background && self.kappa != 0.0 {
            return Err(GridError::BadParameter {
                name: "kappa",
                reason: "must be 0 when the background pressure is disabled".into(),
            });
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(GridError::BadParameter {
                name: "t_end",
                reason: format!("must be >= 0, got {}", self.t_end),
            });
        }
        Ok(())
    }
}

/// Periodic structured grid. `ny == 1` selects 1D mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
}

impl Grid {
    pub fn new(nx: usize, ny: usize, dx: f64, dy: f64) -> Result<Self, GridError> {
        if nx < 4 {
            return Err(GridError::TooFewCells(nx));
        }
        if ny < 1 {
            return Err(GridError::EmptyRows);
        }
        if !(dx.is_finite() && dx > 0.0 && dy.is_finite() && dy > 0.0) {
            return Err(GridError::BadSpacing { dx, dy });
        }
        Ok(Self { nx, ny, dx, dy })
    }

    pub fn is_1d(&self) -> bool {
        self.ny == 1
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Index of the cell offset by `(di, dj)` from `(i, j)`, wrapped periodically.
    #[inline]
    pub fn offset(&self, i: usize, j: usize, di: isize, dj: isize) -> usize {
        let ii = wrap_index(i as isize + di, self.nx);
        let jj = wrap_index(j as isize + dj, self.ny);
        jj * self.nx + ii
    }

    /// Cell-center coordinates.
    pub fn center(&self, i: usize, j: usize) -> (f64, f64) {
        ((i as f64 + 0.5) * self.dx, (j as f64 + 0.5) * self.dy)
    }

    pub fn min_spacing(&self) -> f64 {
        if self.is_1d() {
            self.dx
        } else {
            self.dx.min(self.dy)
        }
    }
}

/// Convenience wrapper around [`Grid::new`].
pub fn make_grid(nx: usize, ny: usize, dx: f64, dy: f64) -> Result<Grid, GridError> {
    Grid::new(nx, ny, dx, dy)
}

/// Periodic wrap of a signed index into `[0, n)`.
#[inline]
pub fn wrap_index(i: isize, n: usize) -> usize {
    i.rem_euclid(n as isize) as usize
}

/// Density and momentum on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub rho: Vec<f64>,
    pub q1: Vec<f64>,
    pub q2: Vec<f64>,
    pub time: f64,
}

impl FieldState {
    /// Uniform density and momentum.
    pub fn uniform(grid: &Grid, rho: f64, q: (f64, f64)) -> Self {
        let n = grid.len();
        Self {
            rho: vec![rho; n],
            q1: vec![q.0; n],
            q2: vec![q.1; n],
            time: 0.0,
        }
    }

    pub fn check_shape(&self, grid: &Grid) -> Result<(), GridError> {
        let n = grid.len();
        for len in [self.rho.len(), self.q1.len(), self.q2.len()] {
            if len != n {
                return Err(GridError::ShapeMismatch {
                    expected: n,
                    got: len,
                });
            }
        }
        Ok(())
    }

    pub fn total_mass(&self) -> f64 {
        self.rho.iter().sum()
    }

    pub fn max_density(&self) -> f64 {
        self.rho.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.rho
            .iter()
            .chain(&self.q1)
            .chain(&self.q2)
            .all(|v| v.is_finite())
    }

    /// Clamp the density from below by [`RHO_MIN`].
    pub fn apply_floor(&mut self) {
        for r in &mut self.rho {
            if *r < RHO_MIN {
                *r = RHO_MIN;
            }
        }
    }
}

/// Velocity `q / rho` in one cell. No normalization is applied.
#[inline]
pub fn omega_of(state: &FieldState, cell: usize) -> (f64, f64) {
    let rho = state.rho[cell].max(RHO_MIN);
    (state.q1[cell] / rho, state.q2[cell] / rho)
}
