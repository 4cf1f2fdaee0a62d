//! Wave analysis of the one-dimensional SOH system in angle variables.
//!
//! With `Omega = (cos theta, sin theta)` and `u = cos theta`, the linearized
//! system around a state `(rho, u)` has the coefficient matrix
//!
//! ```text
//! A = [[u, rho], [-lbar (1 - u^2), c u]],   lbar = lambda p_eps'(rho) / rho
//! ```
//!
//! whose eigenvalues are `xi = ((1 + c) u +- sqrt(D)) / 2` with
//! `D = (1 - c)^2 u^2 + 4 lbar (1 - u^2)`.

use crate::error::AnalysisError;
use crate::grid::ModelParams;
use crate::pressure::PressureModel;

/// Density and direction angle of a spatially uniform state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleState {
    pub rho: f64,
    pub theta: f64,
}

impl AngleState {
    pub fn new(rho: f64, theta: f64) -> Self {
        Self { rho, theta }
    }

    /// Velocity projection `cos theta`.
    pub fn u(&self) -> f64 {
        self.theta.cos()
    }
}

/// Eigen-structure of the linearized system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveDecomposition {
    pub xi_minus: f64,
    pub xi_plus: f64,
    /// `du / drho` along the eigenvector of `xi_minus`.
    pub du_per_drho_minus: f64,
    pub du_per_drho_plus: f64,
    pub discriminant: f64,
    /// Set when `rho >= rho_star`: the speeds are reported as `-inf` and `+inf`.
    pub saturated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Minus,
    Plus,
}

fn lambda_bar(rho: f64, params: &ModelParams, pressure: &PressureModel) -> Result<f64, AnalysisError> {
    Ok(params.lambda * pressure.dp_eps(rho)? / rho)
}

pub fn soh_char_speeds(
    state: AngleState,
    params: &ModelParams,
    pressure: &PressureModel,
) -> Result<WaveDecomposition, AnalysisError> {
    if state.rho >= pressure.rho_star() {
        return Ok(WaveDecomposition {
            xi_minus: f64::NEG_INFINITY,
            xi_plus: f64::INFINITY,
            du_per_drho_minus: f64::NAN,
            du_per_drho_plus: f64::NAN,
            discriminant: f64::INFINITY,
            saturated: true,
        });
    }
    let lbar = lambda_bar(state.rho, params, pressure)?;
    Ok(decompose(state.rho, state.u(), params.c, lbar))
}

/// Eigen-structure for a given `lbar`, independent of the pressure law.
///
/// `Delta = (1 - c)^2 u^2 + 4 rho lbar (1 - u^2)`, so that `rho lbar = lambda p_eps'`.
pub fn decompose(rho: f64, u: f64, c: f64, lbar: f64) -> WaveDecomposition {
    let d = (1.0 - c) * (1.0 - c) * u * u + 4.0 * rho * lbar * (1.0 - u * u);
    let r = d.max(0.0).sqrt();
    let mean = 0.5 * (1.0 + c) * u;
    // rho du = -((1 - c) u -+ sqrt(D)) / 2 drho
    let du = |sign: f64| -0.5 * ((1.0 - c) * u - sign * r) / rho;
    WaveDecomposition {
        xi_minus: mean - 0.5 * r,
        xi_plus: mean + 0.5 * r,
        du_per_drho_minus: du(-1.0),
        du_per_drho_plus: du(1.0),
        discriminant: d,
        saturated: false,
    }
}

/// Quasilinear matrix `[[u, rho], [lbar (1 - u^2), c u]]` of the angle system in the unknowns `(rho, u)`.
pub fn matrix_a(
    state: AngleState,
    params: &ModelParams,
    pressure: &PressureModel,
) -> Result<[[f64; 2]; 2], AnalysisError> {
    let lbar = lambda_bar(state.rho, params, pressure)?;
    let u = state.u();
    Ok([[u, state.rho], [lbar * (1.0 - u * u), params.c * u]])
}

/// Sound speed `((c - 1) cos theta +- sqrt((c - 1)^2 cos^2 theta + 4 k sin^2 theta)) / 2`
/// for `k = lambda p_eps'(rho)`, and the Mach number `cos theta / c_s`.
pub fn mach_from_slope(c: f64, theta: f64, lambda_dp: f64, branch: Branch) -> Result<f64, AnalysisError> {
    let (cs, sn) = (theta.cos(), theta.sin());
    let root = ((c - 1.0) * (c - 1.0) * cs * cs + 4.0 * lambda_dp * sn * sn).sqrt();
    let sound = match branch {
        Branch::Plus => 0.5 * ((c - 1.0) * cs + root),
        Branch::Minus => 0.5 * ((c - 1.0) * cs - root),
    };
    if sound == 0.0 || !sound.is_finite() {
        return Err(AnalysisError::UndefinedMach);
    }
    Ok(cs / sound)
}

pub fn mach_number(
    state: AngleState,
    params: &ModelParams,
    pressure: &PressureModel,
    branch: Branch,
) -> Result<f64, AnalysisError> {
    let k = params.lambda * pressure.dp_eps(state.rho)?;
    mach_from_slope(params.c, state.theta, k, branch)
}

/// `f1 = ln|tan(theta/2)|`.
pub fn f1(theta: f64) -> Result<f64, AnalysisError> {
    check_sin(theta)?;
    Ok((0.5 * theta).tan().abs().ln())
}

/// `f2 = ln|sin theta|`.
pub fn f2(theta: f64) -> Result<f64, AnalysisError> {
    check_sin(theta)?;
    Ok(theta.sin().abs().ln())
}

fn check_sin(theta: f64) -> Result<(), AnalysisError> {
    if theta.sin() == 0.0 || (theta / std::f64::consts::PI).fract() == 0.0 {
        Err(AnalysisError::SinZero(theta))
    } else {
        Ok(())
    }
}

pub fn conservative_vars(state: AngleState) -> Result<(f64, f64), AnalysisError> {
    Ok((f1(state.theta)?, f2(state.theta)?))
}

/// Antiderivative of `p_eps'(rho) / rho`, normalized to vanish at `rho_star / 2`.
///
/// Only differences of `g` carry meaning.
pub fn g_of(rho: f64, pressure: &PressureModel) -> Result<f64, AnalysisError> {
    g_from(rho, 0.5 * pressure.rho_star(), pressure)
}

/// `g(rho) - g(reference)` by adaptive Gauss-Kronrod quadrature in `s = 1/rho - 1/rho_star`.
pub fn g_from(rho: f64, reference: f64, pressure: &PressureModel) -> Result<f64, AnalysisError> {
    pressure.dp_eps(rho)?;
    pressure.dp_eps(reference)?;
    if rho == reference {
        return Ok(0.0);
    }
    let inv_star = 1.0 / pressure.rho_star();
    // g' drho = p'(r)/r * (-r^2 ds) = -p'(r) r ds
    let integrand = |s: f64| {
        let r = 1.0 / (s + inv_star);
        -pressure.dp_eps_at_gap(s) * r
    };
    let (a, b) = (1.0 / reference - inv_star, 1.0 / rho - inv_star);
    let value = adaptive_gk15(&integrand, a, b)?;
    Ok(value)
}

const G_ABS_TOL: f64 = 1e-13;
const G_REL_TOL: f64 = 1e-14;
const GK_MAX_DEPTH: usize = 60;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// 15-point Kronrod estimate and its difference to the embedded 7-point Gauss rule.
fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for k in 0..7 {
        let dx = half * XGK[k];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[k] * pair;
        if k % 2 == 1 {
            gauss += WG[k / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

fn adaptive_gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> Result<f64, AnalysisError> {
    let (estimate, _) = gk15(f, a, b);
    if !estimate.is_finite() {
        return Err(AnalysisError::Quadrature(f64::INFINITY));
    }
    let density = G_ABS_TOL.max(G_REL_TOL * estimate.abs()) / (b - a).abs();
    gk15_split(f, a, b, density, 0)
}

/// Bisects until each piece meets its share of the error budget, `density * |b - a|`.
fn gk15_split(f: &impl Fn(f64) -> f64, a: f64, b: f64, density: f64, depth: usize) -> Result<f64, AnalysisError> {
    let (value, err) = gk15(f, a, b);
    if !value.is_finite() {
        return Err(AnalysisError::Quadrature(f64::INFINITY));
    }
    if err <= density * (b - a).abs() || err <= 50.0 * f64::EPSILON * value.abs() {
        return Ok(value);
    }
    if depth >= GK_MAX_DEPTH {
        return Err(AnalysisError::Quadrature(err));
    }
    let mid = 0.5 * (a + b);
    Ok(gk15_split(f, a, mid, density, depth + 1)? + gk15_split(f, mid, b, density, depth + 1)?)
}

/// Shock-curve relation of the conservative form through `left`; zero on the curve.
pub fn shock_curve_residual(
    left: AngleState,
    right: AngleState,
    params: &ModelParams,
    pressure: &PressureModel,
) -> Result<f64, AnalysisError> {
    let (f1l, f2l) = conservative_vars(left)?;
    let (f1r, f2r) = conservative_vars(right)?;
    let dg = g_from(right.rho, left.rho, pressure)?;
    let lhs = (right.rho - left.rho) * (params.c * (f2r - f2l) - params.lambda * dg);
    let rhs = (right.rho * right.u() - left.rho * left.u()) * (f1r - f1l);
    Ok(lhs - rhs)
}

/// Shock speed from the mass equation `rho_t + (rho cos theta)_x = 0`.
pub fn rh_shock_speed(left: AngleState, right: AngleState) -> Result<f64, AnalysisError> {
    if right.rho == left.rho {
        return Err(AnalysisError::EqualDensities(left.rho));
    }
    Ok((right.rho * right.u() - left.rho * left.u()) / (right.rho - left.rho))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pressure::PressureMode;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn setup() -> (ModelParams, PressureModel) {
        let p = ModelParams::default();
        let pm = PressureModel::new(&p).unwrap();
        (p, pm)
    }

    #[test]
    fn symmetric_speeds_at_u_zero() {
        let (p, pm) = setup();
        let s = AngleState::new(0.8, FRAC_PI_2);
        let w = soh_char_speeds(s, &p, &pm).unwrap();
        let speed = (p.lambda * pm.dp_eps(0.8).unwrap()).sqrt();
        assert!((w.xi_plus - speed).abs() < 1e-14);
        assert!((w.xi_minus + speed).abs() < 1e-14);
    }

    #[test]
    fn aligned_speeds_for_c_above_and_below_one() {
        let w = decompose(0.8, 1.0, 2.0, 0.3);
        assert_eq!((w.xi_minus, w.xi_plus), (1.0, 2.0));
        assert_eq!(w.du_per_drho_minus, 0.0);
        assert!((0.8 * w.du_per_drho_plus - 1.0).abs() < 1e-15);

        let w = decompose(0.8, 1.0, 0.5, 0.3);
        assert_eq!((w.xi_minus, w.xi_plus), (0.5, 1.0));
        assert_eq!(w.du_per_drho_plus, 0.0);
        assert!((0.8 * w.du_per_drho_minus + 0.5).abs() < 1e-15);
    }

    #[test]
    fn saturated_at_congestion() {
        let (p, pm) = setup();
        let w = soh_char_speeds(AngleState::new(1.0, 0.3), &p, &pm).unwrap();
        assert!(w.saturated && w.xi_plus == f64::INFINITY);
    }

    #[test]
    fn mach_examples() {
        assert_eq!(mach_from_slope(1.0, FRAC_PI_2, 0.3, Branch::Plus).unwrap(), FRAC_PI_2.cos() / (0.3f64.sqrt()));
        assert!(mach_from_slope(1.0, FRAC_PI_2, 0.3, Branch::Plus).unwrap().abs() < 1e-15);
        // c_s = sqrt(4 * 1/2) / 2 = cos(pi/4)
        let m = mach_from_slope(1.0, FRAC_PI_4, 1.0, Branch::Plus).unwrap();
        assert!((m - 1.0).abs() < 1e-15);
        assert!(mach_from_slope(1.0, 0.0, 1.0, Branch::Plus).is_err());

        let (p, pm) = setup();
        let mut last = f64::INFINITY;
        for rho in [0.9, 0.99, 0.999, 0.9999] {
            let m = mach_number(AngleState::new(rho, 1.0), &p, &pm, Branch::Plus).unwrap();
            assert!(m < last);
            last = m;
        }
        assert!(last < 1e-2);
    }

    #[test]
    fn conservative_var_examples() {
        let (a, b) = conservative_vars(AngleState::new(0.5, FRAC_PI_2)).unwrap();
        assert!(a.abs() < 1e-15 && b.abs() < 1e-15);
        for th in [0.14, 0.7, 1.4502] {
            assert!((f1(PI - th).unwrap() + f1(th).unwrap()).abs() < 1e-13);
        }
        assert!(f1(0.0).is_err());
        assert!(f2(PI).is_err());
    }

    fn g_closed_form(rho: f64, eps: f64) -> f64 {
        // gamma = 2, rho_star = 1: eps p'(r)/r integrates to eps / (1 - r)^2 * (...)
        // with s = 1/r - 1: integrand -2 eps s^-3 (s + 1) ds -> eps (2/s + 1/s^2)
        let s = 1.0 / rho - 1.0;
        eps * (2.0 / s + 1.0 / (s * s))
    }

    #[test]
    fn g_matches_closed_form() {
        let eps = 1e-4;
        let pm = PressureModel::with_mode(eps, 2.0, 1.0, 0.0, PressureMode::SplitHalf).unwrap();
        for (a, b) in [(0.3, 0.6), (0.8, 0.9969), (0.5, 0.999_999)] {
            let got = g_from(b, a, &pm).unwrap();
            let want = g_closed_form(b, eps) - g_closed_form(a, eps);
            assert!((got - want).abs() <= 1e-10 * want.abs().max(1.0), "{a} {b}: {got} vs {want}");
        }
    }

    #[test]
    fn g_differences_ignore_reference() {
        let (_, pm) = setup();
        let d1 = g_of(0.9969, &pm).unwrap() - g_of(0.8, &pm).unwrap();
        let d2 = g_from(0.9969, 0.3, &pm).unwrap() - g_from(0.8, 0.3, &pm).unwrap();
        assert!((d1 - d2).abs() <= 1e-12 * d1.abs().max(1.0));
    }

    #[test]
    fn rh_examples() {
        let l = AngleState::new(0.8, 0.14);
        let r = AngleState::new(0.9969, 1.4502);
        let s = rh_shock_speed(l, r).unwrap();
        assert!((s + 3.414).abs() < 2e-3, "{s}");
        assert_eq!(s, rh_shock_speed(r, l).unwrap());
        let s = rh_shock_speed(AngleState::new(0.3, 0.7), AngleState::new(0.6, 0.7)).unwrap();
        assert!((s - 0.7f64.cos()).abs() < 1e-15);
        assert!(rh_shock_speed(l, l).is_err());
    }

    #[test]
    fn shock_residual_properties() {
        let (p, pm) = setup();
        let l = AngleState::new(0.8, 0.14);
        assert_eq!(shock_curve_residual(l, l, &p, &pm).unwrap(), 0.0);
        let r = AngleState::new(0.9969, 1.4502);
        let a = shock_curve_residual(l, r, &p, &pm).unwrap();
        let b = shock_curve_residual(r, l, &p, &pm).unwrap();
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }
}
