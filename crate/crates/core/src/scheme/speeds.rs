//! Characteristic speeds of the relaxation system and Rusanov diffusion coefficients.

use crate::error::PressureError;
use crate::grid::{FieldState, Grid, ModelParams, RHO_MIN};
use crate::pressure::PressureModel;

/// Which pressure derivative enters the wave speeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpeedMode {
    /// Explicit part `p0` only, as used by the AP scheme.
    Split,
    /// Full pressure `p_eps`, as used by the explicit reference scheme.
    Full,
}

/// Speeds `{c u - r, c u, c u + r}` with `r = sqrt(|(c^2 - c) u^2 + lambda dp|)`.
///
/// A negative radicand (possible when `0 < c < 1`) is replaced by its absolute value.
pub fn char_speeds_from_dp(c: f64, lambda: f64, u: f64, dp: f64) -> [f64; 3] {
    let r = ((c * c - c) * u * u + lambda * dp).abs().sqrt();
    let cu = c * u;
    [cu - r, cu, cu + r]
}

pub fn char_speeds_relax(
    rho: f64,
    u: f64,
    params: &ModelParams,
    pressure: &PressureModel,
    mode: SpeedMode,
) -> Result<[f64; 3], PressureError> {
    let dp = pressure_slope(rho, pressure, mode)?;
    Ok(char_speeds_from_dp(params.c, params.lambda, u, dp))
}

fn pressure_slope(rho: f64, pressure: &PressureModel, mode: SpeedMode) -> Result<f64, PressureError> {
    match mode {
        SpeedMode::Split => pressure.dp0(rho),
        SpeedMode::Full => pressure.dp_eps(rho),
    }
}

/// Largest wave speed magnitude of a cell over both directional systems.
pub fn cell_speed(
    rho: f64,
    q1: f64,
    q2: f64,
    params: &ModelParams,
    pressure: &PressureModel,
    mode: SpeedMode,
) -> Result<f64, PressureError> {
    let r = rho.max(RHO_MIN);
    let dp = pressure_slope(r, pressure, mode)?;
    let (c, lam) = (params.c, params.lambda);
    let one = |u: f64| (c * u).abs() + ((c * c - c) * u * u + lam * dp).abs().sqrt();
    Ok(one(q1 / r).max(one(q2 / r)))
}

/// Face coefficient `max(C_left, C_right)`.
pub fn diffusion_coeff(
    left: (f64, f64, f64),
    right: (f64, f64, f64),
    params: &ModelParams,
    pressure: &PressureModel,
    mode: SpeedMode,
) -> Result<f64, PressureError> {
    let a = cell_speed(left.0, left.1, left.2, params, pressure, mode)?;
    let b = cell_speed(right.0, right.1, right.2, params, pressure, mode)?;
    Ok(a.max(b))
}

/// Per-cell speeds of a whole state, reporting the first failing cell.
pub(crate) fn cell_speeds(
    state: &FieldState,
    params: &ModelParams,
    pressure: &PressureModel,
    mode: SpeedMode,
) -> Result<Vec<f64>, (usize, PressureError)> {
    state
        .rho
        .iter()
        .zip(&state.q1)
        .zip(&state.q2)
        .enumerate()
        .map(|(k, ((&r, &a), &b))| cell_speed(r, a, b, params, pressure, mode).map_err(|e| (k, e)))
        .collect()
}

/// Face coefficients on x-faces (`i + 1/2`, stored at `i`) and y-faces (`j + 1/2`, stored at `j`).
pub(crate) fn face_coeffs(grid: &Grid, speeds: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = grid.len();
    let mut cx = vec![0.0; n];
    let mut cy = vec![0.0; n];
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let k = grid.idx(i, j);
            cx[k] = speeds[k].max(speeds[grid.offset(i, j, 1, 0)]);
            cy[k] = speeds[k].max(speeds[grid.offset(i, j, 0, 1)]);
        }
    }
    (cx, cy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pressure::PressureMode;

    #[test]
    fn speed_examples() {
        let s = char_speeds_from_dp(1.0, 1.0, 0.0, 0.09);
        assert_eq!(s[1], 0.0);
        assert!((s[0] + 0.3).abs() < 1e-15 && (s[2] - 0.3).abs() < 1e-15);

        let s = char_speeds_from_dp(2.0, 1.0, 1.0, 0.0);
        let r2 = 2f64.sqrt();
        assert!((s[0] - (2.0 - r2)).abs() < 1e-15);
        assert_eq!(s[1], 2.0);
        assert!((s[2] - (2.0 + r2)).abs() < 1e-15);

        let s = char_speeds_from_dp(0.5, 1.0, 1.0, 0.0);
        assert!((s[2] - s[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn diffusion_at_rest_is_denser_sound_speed() {
        let params = ModelParams::default();
        let pm = PressureModel::new(&params).unwrap();
        let c = diffusion_coeff((0.7, 0.0, 0.0), (0.8, 0.0, 0.0), &params, &pm, SpeedMode::Split).unwrap();
        let expect = (params.lambda * pm.dp0(0.8).unwrap()).sqrt();
        assert!((c - expect).abs() < 1e-15);
    }

    #[test]
    fn c_one_cell_speed() {
        let params = ModelParams::default();
        let pm = PressureModel::new(&params).unwrap();
        let (rho, u) = (0.8, 0.6);
        let c = cell_speed(rho, rho * u, 0.0, &params, &pm, SpeedMode::Split).unwrap();
        let expect = u + (params.lambda * pm.dp0(rho).unwrap()).sqrt();
        assert!((c - expect).abs() < 1e-14);
    }

    #[test]
    fn split_speed_bounded_across_epsilon() {
        let mut speeds = Vec::new();
        for k in 2..=8 {
            let params = ModelParams {
                epsilon: 10f64.powi(-k),
                ..ModelParams::default()
            };
            let pm = PressureModel::with_mode(params.epsilon, 2.0, 1.0, 0.0, PressureMode::SplitHalf).unwrap();
            speeds.push(cell_speed(0.8, 0.8, 0.0, &params, &pm, SpeedMode::Split).unwrap());
        }
        let max = speeds.iter().cloned().fold(0.0, f64::max);
        let min = speeds.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(max / min < 2.0, "{speeds:?}");
    }
}
