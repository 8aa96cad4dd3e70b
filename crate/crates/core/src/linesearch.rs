//! Inexact line search for the multiplier step along a conjugate direction.
//!
//! A step `θ` is acceptable when it lies in both Wolfe sets
//!
//! ```text
//! L: φ(θ) − φ(0) ≥ m1 ‖d‖² θ      (sufficient increase)
//! R: φ'(θ) ≤ m2 ‖d‖²              (directional derivative reduced)
//! ```
//!
//! and the step length `θ‖d‖` stays inside `(δ/k, δ]` for the current
//! search-region radius `δ`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WolfeParams {
    pub m1: f64,
    pub m2: f64,
    pub step_lo: f64,
    pub step_hi: f64,
    pub max_evals: usize,
}

impl WolfeParams {
    /// Window `[δ/(k‖d‖), δ/‖d‖]` for radius `delta` and divisor `k`.
    pub fn for_radius(m1: f64, m2: f64, delta: f64, d_norm: f64, divisor: f64, max_evals: usize) -> Result<Self> {
        if !(d_norm > 0.0 && d_norm.is_finite()) {
            return Err(Error::Domain("line search needs a nonzero direction".into()));
        }
        let p = WolfeParams {
            m1,
            m2,
            step_lo: delta / (divisor * d_norm),
            step_hi: delta / d_norm,
            max_evals,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.m2 && self.m2 < self.m1 && self.m1 < 0.5) {
            return Err(Error::Domain(format!(
                "Wolfe constants need 0 < m2 < m1 < 0.5, got m1 = {}, m2 = {}",
                self.m1, self.m2
            )));
        }
        if !(0.0 < self.step_lo && self.step_lo < self.step_hi && self.step_hi.is_finite()) {
            return Err(Error::Domain(format!(
                "step window [{}, {}] is empty",
                self.step_lo, self.step_hi
            )));
        }
        if self.max_evals == 0 {
            return Err(Error::Domain("line search needs a positive evaluation budget".into()));
        }
        Ok(())
    }

    fn derivative_step(&self) -> f64 {
        1e-6 * self.step_hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchOutcome {
    /// Both Wolfe conditions hold.
    Wolfe,
    /// Sufficient increase holds at the largest allowed step but the
    /// derivative is still large: the region radius binds.
    RegionCapped,
    /// Budget ran out before both conditions held.
    Exhausted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub theta: f64,
    pub in_l: bool,
    pub in_r: bool,
    pub evals: usize,
    pub achieved_increase: f64,
    pub outcome: SearchOutcome,
    /// Bracket after every shrink, in order.
    pub brackets: Vec<(f64, f64)>,
}

/// Sufficient-increase test.
pub fn in_l(theta: f64, phi0: f64, phi_theta: f64, d_norm_sq: f64, m1: f64) -> bool {
    phi_theta - phi0 >= m1 * d_norm_sq * theta
}

/// Reduced-derivative test.
pub fn in_r(directional_deriv_estimate: f64, d_norm_sq: f64, m2: f64) -> bool {
    directional_deriv_estimate <= m2 * d_norm_sq
}

/// Bisection search on `[step_lo, step_hi]`; every call of `phi` costs one
/// evaluation. The first trial is the largest step.
pub fn wolfe_search<F>(mut phi: F, phi0: f64, d_norm_sq: f64, params: &WolfeParams) -> Result<StepResult>
where
    F: FnMut(f64) -> Result<f64>,
{
    params.validate()?;
    if !(d_norm_sq > 0.0) {
        return Err(Error::Domain("line search needs a nonzero direction".into()));
    }
    let h = params.derivative_step();
    let (mut lo, mut hi) = (params.step_lo, params.step_hi);
    let mut theta = hi;
    let mut evals = 0usize;
    let mut brackets = Vec::new();
    // largest step verified to satisfy L, with its value
    let mut best: Option<(f64, f64)> = None;

    while evals < params.max_evals {
        let value = phi(theta)?;
        evals += 1;
        if in_l(theta, phi0, value, d_norm_sq, params.m1) {
            if best.is_none_or(|(t, _)| theta > t) {
                best = Some((theta, value));
            }
            if evals + 2 > params.max_evals {
                break;
            }
            let deriv = (phi(theta + h)? - phi(theta - h)?) / (2.0 * h);
            evals += 2;
            if in_r(deriv, d_norm_sq, params.m2) {
                return Ok(StepResult {
                    theta,
                    in_l: true,
                    in_r: true,
                    evals,
                    achieved_increase: value - phi0,
                    outcome: SearchOutcome::Wolfe,
                    brackets,
                });
            }
            if theta >= params.step_hi {
                return Ok(StepResult {
                    theta,
                    in_l: true,
                    in_r: false,
                    evals,
                    achieved_increase: value - phi0,
                    outcome: SearchOutcome::RegionCapped,
                    brackets,
                });
            }
            lo = theta;
        } else {
            hi = theta;
        }
        brackets.push((lo, hi));
        theta = 0.5 * (lo + hi);
    }

    if let Some((theta, value)) = best {
        return Ok(StepResult {
            theta,
            in_l: true,
            in_r: false,
            evals,
            achieved_increase: value - phi0,
            outcome: SearchOutcome::Exhausted,
            brackets,
        });
    }
    // nothing passed L: take the middle of what is left of the bracket
    let theta = 0.5 * (lo + hi);
    let (in_l_flag, increase) = if evals < params.max_evals {
        let value = phi(theta)?;
        evals += 1;
        (in_l(theta, phi0, value, d_norm_sq, params.m1), value - phi0)
    } else {
        (false, f64::NAN)
    };
    Ok(StepResult {
        theta,
        in_l: in_l_flag,
        in_r: false,
        evals,
        achieved_increase: increase,
        outcome: SearchOutcome::Exhausted,
        brackets,
    })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn sufficient_increase_examples() {
        // slope exactly ‖d‖²: passes for any m1 < 1
        let d2 = 4.0;
        for theta in [0.01, 0.5, 3.0] {
            assert!(in_l(theta, 1.0, 1.0 + d2 * theta, d2, 0.25));
        }
        assert!(!in_l(0.5, 1.0, 1.0, d2, 0.25));
        assert!(in_l(0.5, 0.0, 0.6, 4.0, 0.25));
    }

    #[test]
    fn reduced_derivative_examples() {
        assert!(in_r(0.0, 4.0, 0.1));
        assert!(in_r(0.39, 4.0, 0.1));
        assert!(!in_r(0.41, 4.0, 0.1));
        // concave φ(θ) = 1 + θ − θ²/4 at its maximizer θ = 2
        let phi = |t: f64| 1.0 + t - t * t / 4.0;
        let h = 1e-6;
        let est = (phi(2.0 + h) - phi(2.0 - h)) / (2.0 * h);
        assert!(est.abs() < 1e-8);
        assert!(in_r(est, 1.0, 0.1));
    }

    #[test]
    fn rejects_bad_constants() {
        let p = WolfeParams { m1: 0.1, m2: 0.25, step_lo: 1.0, step_hi: 2.0, max_evals: 30 };
        assert!(p.validate().is_err());
        let p = WolfeParams { m1: 0.25, m2: 0.1, step_lo: 2.0, step_hi: 2.0, max_evals: 30 };
        assert!(p.validate().is_err());
        assert!(WolfeParams::for_radius(0.25, 0.1, 1.0, 0.0, 2.0, 30).is_err());
    }

    #[test]
    fn quadratic_ray_lands_in_wolfe_interval() {
        // single scenario ω = 2, λ = 0, ρ = 1, x̄ = 0, d = 1, consensus fixed
        // at 0: x̂(θ) = 1 − θ/2 and φ(θ) = 1 + θ − θ²/4
        let phi = |t: f64| 1.0 + t - t * t / 4.0;
        let dphi = |t: f64| 1.0 - t / 2.0;
        let params = WolfeParams::for_radius(0.25, 0.1, 4.4, 1.0, 2.0, 30).unwrap();
        let r = wolfe_search(|t| Ok(phi(t)), phi(0.0), 1.0, &params).unwrap();
        assert_eq!(r.outcome, SearchOutcome::Wolfe);
        // grid oracle: L ∩ R ∩ window
        let mut interval = (f64::INFINITY, f64::NEG_INFINITY);
        let mut t = params.step_lo;
        while t <= params.step_hi {
            if phi(t) - phi(0.0) >= 0.25 * t && dphi(t) <= 0.1 {
                interval = (interval.0.min(t), interval.1.max(t));
            }
            t += 1e-4;
        }
        assert!((2.2 - 1e-9..=3.0 + 1e-9).contains(&interval.0));
        assert!(r.theta >= interval.0 - 1e-4 && r.theta <= interval.1 + 1e-4, "θ = {}", r.theta);
    }

    #[test]
    fn decreasing_ray_exhausts_without_increase() {
        let params = WolfeParams::for_radius(0.25, 0.1, 1.0, 1.0, 2.0, 30).unwrap();
        let r = wolfe_search(|t| Ok(-t), 0.0, 1.0, &params).unwrap();
        assert_eq!(r.outcome, SearchOutcome::Exhausted);
        assert!(!r.in_l && !r.in_r);
        assert!(r.theta > params.step_lo && r.theta < params.step_hi);
        assert!(r.evals <= params.max_evals);
    }

    #[test]
    fn region_cap_when_still_climbing() {
        let params = WolfeParams::for_radius(0.25, 0.1, 0.5, 1.0, 2.0, 30).unwrap();
        let r = wolfe_search(|t| Ok(t), 0.0, 1.0, &params).unwrap();
        assert_eq!(r.outcome, SearchOutcome::RegionCapped);
        assert_eq!(r.theta, params.step_hi);
        assert!(r.in_l && !r.in_r);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn steps_stay_in_window(curv in 0.01..10.0f64, slope in 0.1..5.0f64, kink in 0.0..3.0f64,
                                delta in 0.01..5.0f64, d_norm in 0.05..4.0f64, divisor in 1.5..6.0f64) {
            // concave, possibly nonsmooth ray with φ'(0) = slope·‖d‖²
            let d2 = d_norm * d_norm;
            let phi = |t: f64| slope * d2 * t - 0.5 * curv * t * t - kink * (t - 1.0).max(0.0);
            let params = WolfeParams::for_radius(0.25, 0.1, delta, d_norm, divisor, 30).unwrap();
            let r = wolfe_search(|t| Ok(phi(t)), 0.0, d2, &params).unwrap();
            prop_assert!(r.theta >= params.step_lo && r.theta <= params.step_hi);
            let len = r.theta * d_norm;
            prop_assert!(len > delta / divisor * (1.0 + 1e-12) && len <= delta * (1.0 + 1e-12));
            prop_assert!(r.evals <= params.max_evals);
            let mut width = f64::INFINITY;
            for (a, b) in &r.brackets {
                prop_assert!(b - a <= width);
                width = b - a;
            }
            if r.outcome == SearchOutcome::Wolfe {
                let h = 1e-6 * params.step_hi;
                let deriv = (phi(r.theta + h) - phi(r.theta - h)) / (2.0 * h);
                prop_assert!(phi(r.theta) - phi(0.0) >= 0.25 * d2 * r.theta - 1e-8);
                prop_assert!(deriv <= 0.1 * d2 + 1e-8);
            }
        }
    }
}
