//! Initial data for the Riemann and cluster-collision runs, and shock tracking.

use crate::analysis::{soh_char_speeds, AngleState};
use crate::error::{AnalysisError, GridError, SchemeError};
use crate::grid::{FieldState, Grid, ModelParams};
use crate::pressure::PressureModel;

/// Piecewise-constant data in x with a single jump inside the window `[0, 1]`.
///
/// The grid is periodic, so the solver domain extends the window by
/// `left_pad` and `right_pad`. The second jump created where the domain wraps
/// around then stays away from the window up to the requested time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiemannSpec {
    pub left: AngleState,
    pub right: AngleState,
    pub jump_position: f64,
    pub left_pad: f64,
    pub right_pad: f64,
}

impl RiemannSpec {
    /// First-family shock: `(0.8, 0.14)` on the left, `(0.9969, 1.4502)` on the right, jump at 0.5, no padding.
    pub fn reference() -> Self {
        Self {
            left: AngleState::new(0.8, 0.14),
            right: AngleState::new(0.9969, 1.4502),
            jump_position: 0.5,
            left_pad: 0.0,
            right_pad: 0.0,
        }
    }

    /// Density level used to locate the jump.
    pub fn level(&self) -> f64 {
        0.5 * (self.left.rho + self.right.rho)
    }

    /// Pads wide enough that no wave from the wrap-around jump enters the window before `t_end`.
    ///
    /// Each pad is `1.25 t_end` times the fastest characteristic speed of the
    /// state filling it, plus `0.1`.
    pub fn with_padding_for(
        self,
        t_end: f64,
        params: &ModelParams,
        pressure: &PressureModel,
    ) -> Result<Self, AnalysisError> {
        let reach = |st: AngleState| -> Result<f64, AnalysisError> {
            let w = soh_char_speeds(st, params, pressure)?;
            if w.saturated {
                return Err(AnalysisError::Pressure(crate::error::PressureError::Density {
                    rho: st.rho,
                    rho_star: pressure.rho_star(),
                }));
            }
            Ok(1.25 * t_end * w.xi_minus.abs().max(w.xi_plus.abs()) + 0.1)
        };
        Ok(Self {
            left_pad: reach(self.left)?,
            right_pad: reach(self.right)?,
            ..self
        })
    }
}

impl Default for RiemannSpec {
    fn default() -> Self {
        Self::reference()
    }
}

/// Periodic solver grid covering `[-left_pad, 1 + right_pad]` in x.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiemannDomain {
    pub grid: Grid,
    /// Number of cells left of the window.
    pub offset: usize,
    /// Number of cells inside the window.
    pub window: usize,
}

impl RiemannDomain {
    /// Builds the grid with spacing `dx` (the window must hold a whole number of cells).
    pub fn new(spec: &RiemannSpec, dx: f64, ny: usize, dy: f64) -> Result<Self, GridError> {
        let cells = |len: f64| (len / dx).round() as usize;
        let window = cells(1.0);
        if window == 0 || (window as f64 * dx - 1.0).abs() > 1e-9 {
            return Err(GridError::BadParameter {
                name: "dx",
                reason: format!("the unit window must hold a whole number of cells, dx = {dx}"),
            });
        }
        let offset = (spec.left_pad / dx).ceil() as usize;
        let right = (spec.right_pad / dx).ceil() as usize;
        let grid = Grid::new(offset + window + right, ny, dx, dy)?;
        Ok(Self { grid, offset, window })
    }

    /// Window coordinate of the center of column `i`.
    pub fn x(&self, i: usize) -> f64 {
        (i as f64 - self.offset as f64 + 0.5) * self.grid.dx
    }

    /// Length of the periodic domain.
    pub fn length(&self) -> f64 {
        self.grid.nx as f64 * self.grid.dx
    }

    /// Window coordinate of the left end of the domain.
    pub fn start(&self) -> f64 {
        -(self.offset as f64) * self.grid.dx
    }
}

/// Unit-speed state with `rho` and `Omega = (cos theta, sin theta)` for `x < x0` and `x >= x0`.
pub fn init_riemann(spec: &RiemannSpec, domain: &RiemannDomain) -> FieldState {
    let grid = &domain.grid;
    let mut s = FieldState::uniform(grid, 0.0, (0.0, 0.0));
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let st = if domain.x(i) < spec.jump_position { spec.left } else { spec.right };
            let k = grid.idx(i, j);
            s.rho[k] = st.rho;
            s.q1[k] = st.rho * st.theta.cos();
            s.q2[k] = st.rho * st.theta.sin();
        }
    }
    s
}

fn in_box(x: f64, y: f64, x0: f64, x1: f64, y0: f64, y1: f64) -> bool {
    x >= x0 && x <= x1 && y >= y0 && y <= y1
}

/// Two counter-moving clusters `A`, `B` inside a counterclockwise swirl on `[0, 1]^2`.
///
/// `rho = 0.8` on `A = [1/6, 1/2] x [1/3, 2/3]` (moving right) and
/// `B = [1/2, 5/6] x [1/3, 2/3]` (moving left), `0.7` elsewhere. Membership
/// is decided by cell centers.
pub fn init_collision(grid: &Grid, _params: &ModelParams) -> Result<FieldState, GridError> {
    let lx = grid.nx as f64 * grid.dx;
    let ly = grid.ny as f64 * grid.dy;
    if (lx - 1.0).abs() > 1e-9 || (ly - 1.0).abs() > 1e-9 {
        return Err(GridError::BadParameter {
            name: "grid",
            reason: format!("collision data needs the unit square, grid covers {lx} x {ly}"),
        });
    }
    let mut s = FieldState::uniform(grid, 0.7, (0.0, 0.0));
    let (third, two_thirds) = (1.0 / 3.0, 2.0 / 3.0);
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let (x, y) = grid.center(i, j);
            let k = grid.idx(i, j);
            let (rho, omega) = if in_box(x, y, 1.0 / 6.0, 0.5, third, two_thirds) {
                (0.8, (1.0, 0.0))
            } else if in_box(x, y, 0.5, 10.0 / 12.0, third, two_thirds) {
                (0.8, (-1.0, 0.0))
            } else {
                let (dx, dy) = (x - 0.5, y - 0.5);
                let r = dx.hypot(dy);
                assert!(r > 0.0, "swirl evaluated at its center");
                (0.7, (-dy / r, dx / r))
            };
            s.rho[k] = rho;
            s.q1[k] = rho * omega.0;
            s.q2[k] = rho * omega.1;
        }
    }
    Ok(s)
}

/// Fraction of cells within `tol` of the congestion density.
pub fn congested_fraction(state: &FieldState, params: &ModelParams, tol: f64) -> f64 {
    crate::scheme::congested_fraction(&state.rho, params.rho_star, tol)
}

/// Window coordinate of the density jump on the middle row, or `None` when
/// the profile never crosses the level.
///
/// Crossings are located by linear interpolation between cell centers; with
/// several crossings the one closest (periodically) to `previous` wins.
pub fn track_shock(domain: &RiemannDomain, state: &FieldState, spec: &RiemannSpec, previous: Option<f64>) -> Option<f64> {
    let grid = &domain.grid;
    let j = grid.ny / 2;
    let level = spec.level();
    let len = domain.length();
    let start = domain.start();
    let prev = previous.unwrap_or(spec.jump_position);
    let mut best: Option<(f64, f64)> = None;
    for i in 0..grid.nx {
        let ip = (i + 1) % grid.nx;
        let a = state.rho[grid.idx(i, j)] - level;
        let b = state.rho[grid.idx(ip, j)] - level;
        let crosses = (a < 0.0 && b >= 0.0) || (a >= 0.0 && b < 0.0);
        if !crosses {
            continue;
        }
        let frac = a / (a - b);
        let x = (domain.x(i) + frac * grid.dx - start).rem_euclid(len) + start;
        let mut d = (x - prev).abs();
        d = d.min(len - d);
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((x, d));
        }
    }
    best.map(|(x, _)| x)
}

/// Time series of shock positions, unwrapped across the periodic boundary.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ShockTrack {
    pub samples: Vec<(f64, f64)>,
    /// Periodic domain length used for unwrapping.
    pub length: f64,
}

impl ShockTrack {
    pub fn new(length: f64) -> Self {
        Self {
            samples: Vec::new(),
            length,
        }
    }

    /// Appends a sample; positions jumping by more than half the domain are unwrapped.
    pub fn record(&mut self, t: f64, x: f64) {
        let x = match self.samples.last() {
            Some(&(_, last)) => {
                let shift = ((last - x) / self.length).round();
                x + shift * self.length
            }
            None => x,
        };
        if self.samples.last().is_none_or(|&(lt, _)| t > lt) {
            self.samples.push((t, x));
        }
    }

    /// Least-squares slope and rms residual over samples with `t0 <= t <= t1`.
    pub fn fit_speed(&self, t0: f64, t1: f64) -> Option<(f64, f64)> {
        let pts: Vec<(f64, f64)> = self
            .samples
            .iter()
            .copied()
            .filter(|&(t, _)| t >= t0 && t <= t1)
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let n = pts.len() as f64;
        let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let mx = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let stt: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
        let stx: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - mx)).sum();
        if stt == 0.0 {
            return None;
        }
        let slope = stx / stt;
        let rms = (pts
            .iter()
            .map(|p| (p.1 - (mx + slope * (p.0 - mt))).powi(2))
            .sum::<f64>()
            / n)
            .sqrt();
        Some((slope, rms))
    }

    /// First time the unwrapped track reaches `boundary`, linearly interpolated between samples.
    pub fn arrival_time(&self, boundary: f64) -> Option<f64> {
        let first = self.samples.first()?;
        let side = (first.1 - boundary).signum();
        for w in self.samples.windows(2) {
            let (t0, x0) = w[0];
            let (t1, x1) = w[1];
            if (x1 - boundary).signum() != side || x1 == boundary {
                if x1 == x0 {
                    return Some(t1);
                }
                return Some(t0 + (boundary - x0) / (x1 - x0) * (t1 - t0));
            }
        }
        None
    }
}

/// Shock measurements of one Riemann run.
#[derive(Debug, Clone, PartialEq)]
pub struct RiemannOutcome {
    pub track: ShockTrack,
    /// Least-squares slope and rms residual over the samples inside the window.
    pub speed_fit: Option<(f64, f64)>,
    /// First time the front reaches the left end of the window.
    pub arrival: Option<f64>,
    pub state: FieldState,
    pub steps: usize,
}

impl RiemannOutcome {
    /// Speed implied by the arrival time, `-x0 / t_arrival`.
    pub fn arrival_speed(&self, spec: &RiemannSpec) -> Option<f64> {
        self.arrival.map(|t| -spec.jump_position / t)
    }
}

/// Runs AP steps up to `params.t_end`, tracking the jump after every step.
pub fn run_riemann(
    spec: &RiemannSpec,
    domain: &RiemannDomain,
    params: &ModelParams,
    pressure: &PressureModel,
) -> Result<RiemannOutcome, SchemeError> {
    let steps = (params.t_end / params.dt).round() as usize;
    let mut state = init_riemann(spec, domain);
    let mut track = ShockTrack::new(domain.length());
    track.record(0.0, spec.jump_position);
    let mut previous = None;
    for _ in 0..steps {
        state = crate::scheme::ap_step(&domain.grid, &state, params, pressure)?.0;
        if let Some(x) = track_shock(domain, &state, spec, previous) {
            track.record(state.time, x);
            previous = Some(x);
        }
    }
    let inside = ShockTrack {
        samples: track.samples.iter().copied().filter(|&(_, x)| x >= 0.0).collect(),
        length: track.length,
    };
    let speed_fit = inside.fit_speed(0.0, f64::INFINITY);
    let arrival = track.arrival_time(0.0);
    Ok(RiemannOutcome {
        track,
        speed_fit,
        arrival,
        state,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    fn unit_domain(spec: &RiemannSpec) -> RiemannDomain {
        RiemannDomain::new(spec, 0.005, 1, 1.0).unwrap()
    }

    #[test]
    fn riemann_halves() {
        let spec = RiemannSpec::reference();
        let d = unit_domain(&spec);
        assert_eq!((d.grid.nx, d.offset, d.window), (200, 0, 200));
        let s = init_riemann(&spec, &d);
        assert_eq!(s.rho[0], 0.8);
        assert_eq!(s.rho[199], 0.9969);
        assert!((s.q2[199] / s.rho[199] - 1.4502f64.sin()).abs() < 1e-15);
        for k in 0..200 {
            let n = (s.q1[k].powi(2) + s.q2[k].powi(2)).sqrt() / s.rho[k];
            assert!((n - 1.0).abs() < 1e-12);
        }
        let flat = RiemannSpec {
            right: spec.left,
            ..spec
        };
        let s = init_riemann(&flat, &unit_domain(&flat));
        assert!(s.rho.iter().all(|&r| r == 0.8));
    }

    #[test]
    fn padding_covers_fast_waves() {
        let p = ModelParams::default();
        let pm = PressureModel::new(&p).unwrap();
        let spec = RiemannSpec::reference().with_padding_for(0.14, &p, &pm).unwrap();
        assert!(spec.left_pad > 0.1 && spec.left_pad < 1.0, "{}", spec.left_pad);
        assert!(spec.right_pad > 10.0, "{}", spec.right_pad);
        let d = RiemannDomain::new(&spec, 0.005, 1, 1.0).unwrap();
        assert_eq!(d.window, 200);
        assert!((d.x(d.offset) - 0.0025).abs() < 1e-15);
        let s = init_riemann(&spec, &d);
        assert_eq!(s.rho[0], 0.8);
        assert_eq!(s.rho[d.offset + 99], 0.8);
        assert_eq!(s.rho[d.offset + 100], 0.9969);
        assert_eq!(s.rho[d.grid.nx - 1], 0.9969);
        let x = track_shock(&d, &s, &spec, None).unwrap();
        assert!((x - 0.5).abs() <= 0.0025 + 1e-12);
        assert!(RiemannDomain::new(&spec, 0.003, 1, 1.0).is_err());
    }

    #[test]
    fn collision_examples() {
        let g = make_grid(200, 200, 0.005, 0.005).unwrap();
        let s = init_collision(&g, &ModelParams::default()).unwrap();
        // cell centered at (0.2525, 0.5025)
        let k = g.idx(50, 100);
        assert_eq!((s.rho[k], s.q1[k] / s.rho[k], s.q2[k]), (0.8, 1.0, 0.0));
        // cell centered at (0.5025, 0.9025): swirl points in -x
        let k = g.idx(100, 180);
        assert_eq!(s.rho[k], 0.7);
        assert!((s.q1[k] / 0.7 + 1.0).abs() < 1e-3 && (s.q2[k] / 0.7).abs() < 1e-2);
        for k in 0..g.len() {
            let n = (s.q1[k].powi(2) + s.q2[k].powi(2)).sqrt() / s.rho[k];
            assert!((n - 1.0).abs() < 1e-12);
            assert!(s.rho[k] == 0.7 || s.rho[k] == 0.8);
        }
    }

    #[test]
    fn swirl_at_exact_point() {
        // 10 cells: center of cell (4, 8) is (0.45, 0.85)
        let g = make_grid(10, 10, 0.1, 0.1).unwrap();
        let s = init_collision(&g, &ModelParams::default()).unwrap();
        let k = g.idx(4, 8);
        let r = (0.05f64.powi(2) + 0.35f64.powi(2)).sqrt();
        assert!((s.q1[k] / 0.7 + 0.35 / r).abs() < 1e-12);
        assert!((s.q2[k] / 0.7 + 0.05 / r).abs() < 1e-12);
    }

    #[test]
    fn tracking_step_and_uniform() {
        let spec = RiemannSpec::reference();
        let d = unit_domain(&spec);
        let mut s = init_riemann(&spec, &d);
        // remove the wrap-around jump so only the interior one remains
        s.rho[199] = 0.8;
        let x = track_shock(&d, &s, &spec, None).unwrap();
        assert!((x - 0.5).abs() <= 0.0025 + 1e-12);
        let flat = FieldState::uniform(&d.grid, 0.9, (0.0, 0.0));
        assert_eq!(track_shock(&d, &flat, &spec, None), None);
    }

    #[test]
    fn track_fit_and_arrival() {
        let mut tr = ShockTrack::new(1.0);
        for k in 0..30 {
            let t = k as f64 * 0.005;
            let x = (0.5 - 3.5 * t).rem_euclid(1.0);
            tr.record(t, x);
        }
        let (s, rms) = tr.fit_speed(0.0, 1.0).unwrap();
        assert!((s + 3.5).abs() < 1e-9 && rms < 1e-9);
        let ta = tr.arrival_time(0.0).unwrap();
        assert!((ta - 0.5 / 3.5).abs() < 1e-9);
    }

    #[test]
    fn congested_fraction_monotone_in_tol() {
        let g = make_grid(10, 1, 0.1, 1.0).unwrap();
        let mut s = FieldState::uniform(&g, 0.7, (0.0, 0.0));
        for k in 0..10 {
            s.rho[k] = 0.9 + 0.0099 * k as f64;
        }
        let p = ModelParams::default();
        let mut last = 0.0;
        for tol in [1e-4, 1e-3, 1e-2, 0.05, 0.2] {
            let f = congested_fraction(&s, &p, tol);
            assert!(f >= last);
            last = f;
        }
        assert_eq!(last, 1.0);
    }
}
