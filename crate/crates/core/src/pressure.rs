//! Singular congestion pressure and its explicit/implicit splitting.
//!
//! The base law is `p(rho) = (1/rho - 1/rho_star)^(-gamma)`, which behaves
//! like `rho^gamma` at low density and blows up at `rho_star`. The scaled
//! pressure `p_eps = eps * p` (plus `kappa * rho^gamma` when a background
//! pressure is active) is split as `p_eps = p0 + p1`:
//!
//! - [`PressureMode::SplitHalf`]: `p0 = p1 = eps * p / 2` below the matching
//!   density `rho_star - delta`, `delta = eps^(1/(gamma+2))`; above it `p0`
//!   continues as the second-order Taylor polynomial of `eps * p / 2`, and
//!   `p1 = p_eps - p0` carries the pole.
//! - [`PressureMode::Background`]: `p0 = kappa * rho^gamma`, `p1 = eps * p`.
//!
//! `p0` stays bounded uniformly in `eps` and is treated explicitly by the
//! scheme; `p1` is strictly increasing, so the implicit pressure can be
//! inverted back to a density that always stays below `rho_star`.

use crate::error::PressureError;
use crate::grid::ModelParams;

const INVERT_REL_TOL: f64 = 1e-12;
const INVERT_MAX_NEWTON: usize = 100;
const INVERT_BRACKET_WIDTH: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PressureMode {
    SplitHalf,
    Background,
}

/// Immutable pressure law with cached Taylor data at the matching point.
#[derive(Debug, Clone, PartialEq)]
pub struct PressureModel {
    epsilon: f64,
    gamma: f64,
    rho_star: f64,
    kappa: f64,
    mode: PressureMode,
    delta: f64,
    rho_match: f64,
    p_match: f64,
    dp_match: f64,
    d2p_match: f64,
}

impl PressureModel {
    pub fn new(params: &ModelParams) -> Result<Self, PressureError> {
        let mode = if params.use_background {
            PressureMode::Background
        } else {
            PressureMode::SplitHalf
        };
        Self::with_mode(
            params.epsilon,
            params.gamma,
            params.rho_star,
            params.kappa,
            mode,
        )
    }

    pub fn with_mode(
        epsilon: f64,
        gamma: f64,
        rho_star: f64,
        kappa: f64,
        mode: PressureMode,
    ) -> Result<Self, PressureError> {
        let delta = epsilon.powf(1.0 / (gamma + 2.0));
        let mut model = Self {
            epsilon,
            gamma,
            rho_star,
            kappa: if mode == PressureMode::Background {
                kappa
            } else {
                0.0
            },
            mode,
            delta,
            rho_match: rho_star - delta,
            p_match: 0.0,
            dp_match: 0.0,
            d2p_match: 0.0,
        };
        if mode == PressureMode::SplitHalf {
            if !(delta < rho_star) {
                return Err(PressureError::MatchingWidth { delta, rho_star });
            }
            let a = model.rho_match;
            model.p_match = model.base(a)?;
            model.dp_match = model.base_d1(a)?;
            model.d2p_match = model.base_d2(a)?;
        }
        Ok(model)
    }

    pub fn mode(&self) -> PressureMode {
        self.mode
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn rho_star(&self) -> f64 {
        self.rho_star
    }

    /// Matching width `delta = eps^(1/(gamma+2))`.
    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Density `rho_star - delta` where the quadratic continuation of `p0` starts.
    pub fn matching_density(&self) -> f64 {
        self.rho_match
    }

    fn check(&self, rho: f64) -> Result<f64, PressureError> {
        if rho > 0.0 && rho < self.rho_star {
            Ok(1.0 / rho - 1.0 / self.rho_star)
        } else {
            Err(PressureError::Density {
                rho,
                rho_star: self.rho_star,
            })
        }
    }

    fn base(&self, rho: f64) -> Result<f64, PressureError> {
        let s = self.check(rho)?;
        Ok(s.powf(-self.gamma))
    }

    fn base_d1(&self, rho: f64) -> Result<f64, PressureError> {
        let s = self.check(rho)?;
        Ok(self.gamma * s.powf(-self.gamma - 1.0) / (rho * rho))
    }

    fn base_d2(&self, rho: f64) -> Result<f64, PressureError> {
        let s = self.check(rho)?;
        let g = self.gamma;
        let r2 = rho * rho;
        Ok(g * (g + 1.0) * s.powf(-g - 2.0) / (r2 * r2) - 2.0 * g * s.powf(-g - 1.0) / (r2 * rho))
    }

    /// Unscaled singular pressure `p(rho)`.
    pub fn p(&self, rho: f64) -> Result<f64, PressureError> {
        self.base(rho)
    }

    pub fn dp(&self, rho: f64) -> Result<f64, PressureError> {
        self.base_d1(rho)
    }

    /// Background pressure `kappa * rho^gamma`; zero in split-half mode.
    pub fn p_background(&self, rho: f64) -> f64 {
        if self.kappa == 0.0 {
            0.0
        } else {
            self.kappa * rho.max(0.0).powf(self.gamma)
        }
    }

    fn dp_background(&self, rho: f64) -> f64 {
        if self.kappa == 0.0 {
            0.0
        } else {
            self.kappa * self.gamma * rho.max(0.0).powf(self.gamma - 1.0)
        }
    }

    /// Full pressure `eps * p + p_B`.
    pub fn p_eps(&self, rho: f64) -> Result<f64, PressureError> {
        Ok(self.epsilon * self.base(rho)? + self.p_background(rho))
    }

    /// `dp_eps` expressed through the gap `s = 1/rho - 1/rho_star > 0`, accurate for small `s`.
    pub fn dp_eps_at_gap(&self, s: f64) -> f64 {
        let rho = 1.0 / (s + 1.0 / self.rho_star);
        self.epsilon * self.gamma * s.powf(-self.gamma - 1.0) / (rho * rho) + self.dp_background(rho)
    }

    pub fn dp_eps(&self, rho: f64) -> Result<f64, PressureError> {
        Ok(self.epsilon * self.base_d1(rho)? + self.dp_background(rho))
    }

    /// Explicitly treated part `p0`.
    pub fn split_p0(&self, rho: f64) -> Result<f64, PressureError> {
        match self.mode {
            PressureMode::Background => {
                if rho > 0.0 {
                    Ok(self.p_background(rho))
                } else {
                    Err(PressureError::Density {
                        rho,
                        rho_star: self.rho_star,
                    })
                }
            }
            PressureMode::SplitHalf => {
                if rho <= self.rho_match {
                    Ok(0.5 * self.epsilon * self.base(rho)?)
                } else {
                    self.check(rho)?;
                    Ok(self.quadratic(rho))
                }
            }
        }
    }

    fn quadratic(&self, rho: f64) -> f64 {
        let h = rho - self.rho_match;
        0.5 * self.epsilon * (self.p_match + self.dp_match * h + 0.5 * self.d2p_match * h * h)
    }

    /// Supremum of `p0` over `(0, rho_star)`, attained as `rho -> rho_star`.
    pub fn p0_sup(&self) -> f64 {
        match self.mode {
            PressureMode::SplitHalf => self.quadratic(self.rho_star),
            PressureMode::Background => self.p_background(self.rho_star),
        }
    }

    pub fn dp0(&self, rho: f64) -> Result<f64, PressureError> {
        match self.mode {
            PressureMode::Background => {
                if rho > 0.0 {
                    Ok(self.dp_background(rho))
                } else {
                    Err(PressureError::Density {
                        rho,
                        rho_star: self.rho_star,
                    })
                }
            }
            PressureMode::SplitHalf => {
                if rho <= self.rho_match {
                    Ok(0.5 * self.epsilon * self.base_d1(rho)?)
                } else {
                    self.check(rho)?;
                    let h = rho - self.rho_match;
                    Ok(0.5 * self.epsilon * (self.dp_match + self.d2p_match * h))
                }
            }
        }
    }

    /// Implicitly treated part `p1 = p_eps - p0`.
    pub fn split_p1(&self, rho: f64) -> Result<f64, PressureError> {
        match self.mode {
            PressureMode::Background => Ok(self.epsilon * self.base(rho)?),
            PressureMode::SplitHalf => Ok(self.p_eps(rho)? - self.split_p0(rho)?),
        }
    }

    pub fn dp1(&self, rho: f64) -> Result<f64, PressureError> {
        match self.mode {
            PressureMode::Background => Ok(self.epsilon * self.base_d1(rho)?),
            PressureMode::SplitHalf => Ok(self.dp_eps(rho)? - self.dp0(rho)?),
        }
    }

    /// Value of `p1` at the matching density, where the closed-form inverse stops.
    fn p1_at_match(&self) -> f64 {
        0.5 * self.epsilon * self.p_match
    }

    /// Density with `eps * p(rho) = scale * y`, inverted in closed form.
    fn closed_form_inverse(&self, y: f64, scale: f64) -> f64 {
        let s = (scale * y / self.epsilon).powf(-1.0 / self.gamma);
        1.0 / (s + 1.0 / self.rho_star)
    }

    /// Unique density in `[0, rho_star)` with `p1(rho) = y`.
    ///
    /// `y = 0` maps to vacuum (`rho = 0`); callers apply the density floor.
    pub fn invert_p1(&self, y: f64) -> Result<f64, PressureError> {
        if y.is_nan() || y < 0.0 {
            return Err(PressureError::NegativePressure(y));
        }
        if y == 0.0 {
            return Ok(0.0);
        }
        if y.is_infinite() {
            return Ok(self.rho_star);
        }
        match self.mode {
            PressureMode::Background => Ok(self.closed_form_inverse(y, 1.0)),
            PressureMode::SplitHalf => {
                if y <= self.p1_at_match() {
                    let rho = self.closed_form_inverse(y, 2.0);
                    Ok(rho.min(self.rho_match))
                } else {
                    self.invert_quadratic_zone(y)
                }
            }
        }
    }

    // Safeguarded Newton in s = 1/rho - 1/rho_star, where p1 is decreasing and
    // close to convex. The bracket comes from eps*p/2 <= p1 <= eps*p above the
    // matching point.
    fn invert_quadratic_zone(&self, y: f64) -> Result<f64, PressureError> {
        let inv_star = 1.0 / self.rho_star;
        let rho_of = |s: f64| 1.0 / (s + inv_star);
        let mut s_hi = 1.0 / self.rho_match - inv_star;
        let mut s_lo = (2.0 * y / self.epsilon).powf(-1.0 / self.gamma).min(s_hi);
        let tol = INVERT_REL_TOL * y.max(1.0);

        let mut s = s_lo;
        for _ in 0..INVERT_MAX_NEWTON {
            let rho = rho_of(s);
            if rho >= self.rho_star {
                s_lo = s;
                s = 0.5 * (s_lo + s_hi);
                continue;
            }
            let g = self.split_p1(rho)? - y;
            if g.abs() <= tol {
                let polished = s + g / (self.dp1(rho)? * rho * rho);
                if polished > s_lo && polished < s_hi {
                    return Ok(rho_of(polished));
                }
                return Ok(rho);
            }
            if g > 0.0 {
                s_lo = s;
            } else {
                s_hi = s;
            }
            // d p1 / ds = -p1'(rho) * rho^2
            let slope = -self.dp1(rho)? * rho * rho;
            let mut next = s - g / slope;
            if !(next > s_lo && next < s_hi) || !next.is_finite() {
                next = 0.5 * (s_lo + s_hi);
            }
            s = next;
            if (s_hi - s_lo) <= INVERT_BRACKET_WIDTH * s_hi {
                break;
            }
        }
        while (s_hi - s_lo) > INVERT_BRACKET_WIDTH * s_hi {
            let mid = 0.5 * (s_lo + s_hi);
            if mid <= s_lo || mid >= s_hi {
                break;
            }
            let g = self.split_p1(rho_of(mid))? - y;
            if g > 0.0 {
                s_lo = mid;
            } else {
                s_hi = mid;
            }
        }
        Ok(rho_of(0.5 * (s_lo + s_hi)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn split(eps: f64) -> PressureModel {
        PressureModel::with_mode(eps, 2.0, 1.0, 0.0, PressureMode::SplitHalf).unwrap()
    }

    fn background(eps: f64, kappa: f64) -> PressureModel {
        PressureModel::with_mode(eps, 2.0, 1.0, kappa, PressureMode::Background).unwrap()
    }

    #[test]
    fn base_pressure_hand_values() {
        let m = split(1e-4);
        assert_relative_eq!(m.p(0.5).unwrap(), 1.0, max_relative = 1e-14);
        // 1 / (1/0.9 - 1)^2 = (0.9 / 0.1)^2
        assert_relative_eq!(m.p(0.9).unwrap(), 81.0, max_relative = 1e-12);
        assert!(m.p(1.0).is_err());
        assert!(m.p(0.0).is_err());
        assert!(m.p(-0.1).is_err());
    }

    #[test]
    fn low_density_behaves_like_power_law() {
        let m = split(1e-4);
        for rho in [1e-3, 1e-5, 1e-7] {
            let ratio = m.p(rho).unwrap() / rho.powf(2.0);
            assert!((ratio - 1.0).abs() < 3.0 * rho);
        }
    }

    #[test]
    fn scaled_and_background_pressure() {
        assert_relative_eq!(split(1e-4).p_eps(0.5).unwrap(), 1e-4, max_relative = 1e-14);
        assert_relative_eq!(
            background(1e-4, 1.0).p_eps(0.5).unwrap(),
            1e-4 + 0.25,
            max_relative = 1e-14
        );
        let b = background(1e-4, 1.0);
        assert_relative_eq!(b.p_background(0.7), 0.49, max_relative = 1e-14);
        assert_relative_eq!(b.p_background(1.0), 1.0, max_relative = 1e-14);
        assert_eq!(split(1e-4).p_background(0.7), 0.0);
        // eps -> 0 at fixed rho < rho_star
        let tiny = split(1e-14);
        assert!(tiny.p_eps(0.5).unwrap() < 1e-13);
    }

    #[test]
    fn half_split_below_matching_point() {
        let m = split(1e-4);
        assert_relative_eq!(m.delta(), 0.1, max_relative = 1e-12);
        for rho in [0.1, 0.5, 0.7, 0.89] {
            let half = 0.5 * m.p_eps(rho).unwrap();
            assert_eq!(m.split_p0(rho).unwrap(), half);
            assert_eq!(m.split_p1(rho).unwrap(), half);
        }
    }

    #[test]
    fn matching_is_second_order() {
        let m = split(1e-4);
        let a = m.matching_density();
        let h = 1e-5 * m.delta();
        let half = |r: f64| 0.5 * m.p_eps(r).unwrap();
        // value
        assert_relative_eq!(m.quadratic(a), half(a), max_relative = 1e-14);
        // first derivative from both sides
        let left = 0.5 * m.epsilon() * m.dp(a - 1e-12).unwrap();
        let right = m.dp0(a + 1e-12).unwrap();
        assert!((left - right).abs() <= 1e-10 * left.abs());
        // second derivative of the quadratic vs finite difference of eps*p/2
        let fd2 = (half(a + h) - 2.0 * half(a) + half(a - h)) / (h * h);
        let quad2 = 0.5 * m.epsilon() * m.d2p_match;
        assert!((fd2 - quad2).abs() <= 1e-4 * quad2.abs(), "{fd2} vs {quad2}");
    }

    #[test]
    fn p0_sup_shrinks_with_epsilon() {
        let eps: Vec<f64> = (2..=8).map(|k| 10f64.powi(-k)).collect();
        let sups: Vec<f64> = eps.iter().map(|&e| split(e).p0_sup()).collect();
        for w in sups.windows(2) {
            assert!(w[1] <= w[0], "{sups:?}");
        }
        assert!(sups.iter().all(|s| s.is_finite()));
        // p0 never exceeds its value at rho_star on a dense sample
        for &e in &eps {
            let m = split(e);
            let sup = m.p0_sup();
            for k in 1..2000 {
                let rho = k as f64 / 2000.0;
                assert!(m.split_p0(rho).unwrap() <= sup * (1.0 + 1e-14));
            }
        }
    }

    #[test]
    fn p1_background_mode() {
        let b = background(1e-4, 1.0);
        for rho in [0.2, 0.5, 0.95] {
            assert_relative_eq!(
                b.split_p1(rho).unwrap(),
                1e-4 * b.p(rho).unwrap(),
                max_relative = 1e-14
            );
            assert_relative_eq!(b.split_p0(rho).unwrap(), rho * rho, max_relative = 1e-14);
        }
    }

    #[test]
    fn p1_strictly_increasing_on_grid() {
        for m in [split(1e-4), split(1e-8), split(1e-2), background(1e-4, 1.0)] {
            let mut prev = -1.0;
            for k in 1..1000 {
                let rho = k as f64 / 1000.0;
                let v = m.split_p1(rho).unwrap();
                assert!(v > prev, "not increasing at {rho}");
                prev = v;
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let h = 1e-6;
        for m in [split(1e-4), split(1e-2), background(1e-4, 1.0)] {
            for rho in [0.3, 0.5, 0.8, 0.95] {
                if (rho - m.matching_density()).abs() < 1e-3 {
                    continue;
                }
                let fd0 = (m.split_p0(rho + h).unwrap() - m.split_p0(rho - h).unwrap()) / (2.0 * h);
                let fde = (m.p_eps(rho + h).unwrap() - m.p_eps(rho - h).unwrap()) / (2.0 * h);
                assert_relative_eq!(m.dp0(rho).unwrap(), fd0, max_relative = 1e-6);
                assert_relative_eq!(m.dp_eps(rho).unwrap(), fde, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn dp_eps_nonnegative() {
        let m = split(1e-4);
        for k in 1..1000 {
            assert!(m.dp_eps(k as f64 / 1000.0).unwrap() >= 0.0);
        }
    }

    fn bisection_oracle(m: &PressureModel, y: f64) -> f64 {
        let (mut lo, mut hi) = (1e-8, 1.0 - 1e-14);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if m.split_p1(mid).unwrap() < y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn inverse_matches_bisection() {
        let m = split(1e-4);
        let rho = m.invert_p1(1.0).unwrap();
        assert!((rho - bisection_oracle(&m, 1.0)).abs() < 1e-10);
        assert!(rho > m.matching_density());
        let rho = m.invert_p1(split(1e-4).split_p1(0.8).unwrap()).unwrap();
        assert!((rho - 0.8).abs() < 1e-10);
    }

    #[test]
    fn inverse_approaches_rho_star() {
        let m = split(1e-4);
        let mut last = 0.0;
        for y in [1e2, 1e4, 1e6, 1e8, 1e12] {
            let rho = m.invert_p1(y).unwrap();
            assert!(rho < 1.0 && rho > last);
            last = rho;
        }
        assert!(1.0 - last < 1e-7);
        assert!(m.invert_p1(-1e-3).is_err());
        assert_eq!(m.invert_p1(0.0).unwrap(), 0.0);
    }

    proptest! {
        #[test]
        fn split_is_additive(rho in 1e-8f64..(1.0 - 1e-12), k in 2i32..9) {
            let m = split(10f64.powi(-k));
            let pe = m.p_eps(rho).unwrap();
            let sum = m.split_p0(rho).unwrap() + m.split_p1(rho).unwrap();
            prop_assert!((sum - pe).abs() <= 1e-12 * (1.0 + pe));
        }

        #[test]
        fn invert_is_two_sided_inverse(log_gap in -9.0f64..-0.05, k in 2i32..9, bg in proptest::bool::ANY) {
            let m = if bg { background(10f64.powi(-k), 1.0) } else { split(10f64.powi(-k)) };
            let rho = 1.0 - 10f64.powf(log_gap);
            let y = m.split_p1(rho).unwrap();
            let back = m.invert_p1(y).unwrap();
            prop_assert!((back - rho).abs() <= 1e-10, "rho={} back={}", rho, back);
            let again = m.split_p1(back).unwrap();
            prop_assert!((again - y).abs() <= 1e-10 * y.max(1.0));
        }
    }
}
