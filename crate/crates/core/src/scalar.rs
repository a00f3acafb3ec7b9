//! The uncontrolled superlinear scalar problem u' = λ f(u): closed-form
//! blow-up solutions through Φ, and numeric blow-up detection with
//! extrapolation of the blow-up time.
//!
//! The extrapolation fits Φ(u(t)), which is exactly linear in t along a
//! trajectory of u' = λ f(u), rather than the singular u(t) itself; the
//! fitted slope recovers -λ as a free cross-check.

use crate::error::{Error, Result};
use crate::law::{least_squares_slope, ForcingLaw};
use crate::ode::{Dopri5, HermitePath, StepOutcome, StopReason};

/// Closed-form blowing-up trajectory u⁰(t) = Φ⁻¹(λ(T∞ - t)).
#[derive(Debug, Clone)]
pub struct BlowupSolution {
    pub law: ForcingLaw,
    pub u0: f64,
    pub t_inf: f64,
}

impl BlowupSolution {
    /// u⁰(t) for t < T∞.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if t >= self.t_inf {
            return Err(Error::OutOfRange(format!(
                "t = {t} is past the blow-up time {}",
                self.t_inf
            )));
        }
        self.law.phi_inv(self.law.lambda * (self.t_inf - t))
    }

    /// d/dt u⁰(t) = λ f(u⁰(t)).
    pub fn derivative(&self, t: f64) -> Result<f64> {
        Ok(self.law.lambda * self.law.f(self.eval(t)?))
    }
}

/// T∞ = Φ(u₀)/λ.
pub fn blowup_time(law: &ForcingLaw, u0: f64) -> Result<f64> {
    if !(u0 > 0.0) {
        return Err(Error::OutOfRange(format!("u0 must be positive, got {u0}")));
    }
    Ok(law.phi(u0)? / law.lambda)
}

/// Closed-form solution of the uncontrolled problem from u₀.
pub fn closed_trajectory(law: &ForcingLaw, u0: f64) -> Result<BlowupSolution> {
    let t_inf = blowup_time(law, u0)?;
    Ok(BlowupSolution { law: law.clone(), u0, t_inf })
}

/// Step control for the blow-up detector.
#[derive(Debug, Clone, Copy)]
pub struct StepControl {
    /// Declare blow-up reached once u exceeds this.
    pub cap: f64,
    /// Give up at this time. Defaults to 10 Φ(u₀)/λ when Φ(u₀) is finite,
    /// 10/λ otherwise.
    pub horizon: Option<f64>,
    pub rtol: f64,
    pub atol: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl { cap: 1e8, horizon: None, rtol: 3e-13, atol: 1e-16 }
    }
}

/// Result of the numeric blow-up run.
#[derive(Debug, Clone)]
pub struct BlowupEstimate {
    /// Dense trajectory samples at accepted steps.
    pub path: HermitePath,
    /// Extrapolated blow-up time from the Φ-linearization fit.
    pub t_est: f64,
    /// Fitted rate (should recover λ).
    pub lambda_fit: f64,
    /// Number of samples used in the fit window.
    pub fit_samples: usize,
}

/// Integrate u' = λ f(u) until u exceeds `control.cap`, then extrapolate
/// the blow-up time by a least-squares fit of Φ(u(t)) ≈ λ(T_est - t) over
/// the last decade of growth.
pub fn integrate_until_blowup(
    law: &ForcingLaw,
    u0: f64,
    control: StepControl,
) -> Result<BlowupEstimate> {
    if !(u0 > 0.0) {
        return Err(Error::OutOfRange(format!("u0 must be positive, got {u0}")));
    }
    let phi_u0 = law.phi(u0);
    let superlinear = matches!(&phi_u0, Ok(v) if v.is_finite());
    let horizon = match control.horizon {
        Some(h) => h,
        None => {
            if superlinear {
                10.0 * phi_u0.as_ref().unwrap() / law.lambda
            } else {
                // no finite blow-up functional: bounded watch window
                10.0 / law.lambda
            }
        }
    };

    let solver = Dopri5 { rtol: control.rtol, atol: control.atol, ..Dopri5::default() };
    let mut path = HermitePath::default();
    path.push(0.0, u0, law.lambda * law.f(u0));

    let cap = control.cap;
    // Past this point the remaining time to blow-up is below the f64
    // resolution of t itself: the singularity is resolved.
    let time_resolved = |t: f64, u: f64| -> bool {
        if !superlinear || u < 1e4_f64.min(cap / 1e4).max(10.0 * u0) {
            return false;
        }
        match law.phi(u) {
            Ok(rem) => rem / law.lambda <= 50.0 * f64::EPSILON * t.abs().max(1.0),
            Err(_) => false,
        }
    };
    let out = solver.integrate(
        |_, y, dy| dy[0] = law.lambda * law.f(y[0]),
        0.0,
        &[u0],
        horizon,
        |t, y, dy| {
            path.push(t, y[0], dy[0]);
            if y[0] >= cap || time_resolved(t, y[0]) {
                StepOutcome::Stop
            } else {
                StepOutcome::Continue
            }
        },
    );

    let reached = *path.y.last().unwrap();
    let blowup_certified = match out.stopped {
        StopReason::ObserverStop => true,
        // the stepper ground to a halt: accept only if the remaining time
        // is within a few ulps of the final time
        StopReason::StepFloor => {
            superlinear
                && law
                    .phi(reached)
                    .map(|rem| rem / law.lambda <= 1e3 * f64::EPSILON * out.t.abs().max(1.0))
                    .unwrap_or(false)
        }
        StopReason::ReachedEnd => false,
    };
    if !blowup_certified {
        return Err(Error::CapNotReached { reached, cap, horizon });
    }

    let (t_est, lambda_fit, fit_samples) = fit_blowup_time(law, &path, reached)?;
    Ok(BlowupEstimate { path, t_est, lambda_fit, fit_samples })
}

/// Fit Φ(u(t)) = λ_fit (T_est - t) over samples in the last decade of
/// growth, u in [u_top/10, u_top].
pub(crate) fn fit_blowup_time(
    law: &ForcingLaw,
    path: &HermitePath,
    u_top: f64,
) -> Result<(f64, f64, usize)> {
    let mut pairs = Vec::new();
    for (&t, &u) in path.t.iter().zip(&path.y) {
        if u >= u_top / 10.0 {
            pairs.push((t, law.phi(u)?));
        }
    }
    if pairs.len() < 3 {
        return Err(Error::InsufficientDecade { got: pairs.len(), need: 3 });
    }
    let slope = least_squares_slope(&pairs);
    let n = pairs.len() as f64;
    let mean_t: f64 = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_phi: f64 = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    // Φ = mean_phi + slope (t - mean_t); zero of the fit is T_est
    let lambda_fit = -slope;
    if !(lambda_fit > 0.0) {
        return Err(Error::InsufficientDecade { got: pairs.len(), need: 3 });
    }
    let t_est = mean_t + mean_phi / lambda_fit;
    Ok((t_est, lambda_fit, pairs.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn blowup_time_of_squares_is_one() {
        // u' = u^2, u0 = 1: T = 1
        let law = ForcingLaw::power(2.0, 0.0, 1.0).unwrap();
        assert_relative_eq!(blowup_time(&law, 1.0).unwrap(), 1.0, max_relative = 1e-14);
    }

    #[test]
    fn blowup_time_power_formula() {
        // T = 1/(λ(p-1)u0^(p-1)): p=3, λ=2, u0=1 -> 0.25
        let law = ForcingLaw::power(3.0, 0.0, 2.0).unwrap();
        assert_relative_eq!(blowup_time(&law, 1.0).unwrap(), 0.25, max_relative = 1e-14);
    }

    #[test]
    fn blowup_time_custom_from_quadrature() {
        let law = ForcingLaw::custom("cubic-shift", |s| (1.0 + s).powi(3), 1.0).unwrap();
        // u0 -> 0+ limit: Φ(0) = 1/2; use exactly zero lower bound via small u0
        assert_relative_eq!(law.phi(0.0).unwrap(), 0.5, max_relative = 1e-10);
    }

    #[test]
    fn closed_trajectory_example_values() {
        let law = ForcingLaw::power(2.0, 0.0, 1.0).unwrap();
        let sol = closed_trajectory(&law, 1.0).unwrap();
        assert_relative_eq!(sol.eval(0.5).unwrap(), 2.0, max_relative = 1e-12);
        assert_relative_eq!(sol.eval(0.0).unwrap(), 1.0, max_relative = 1e-12);
        // p=3: u(t) = (1-2t)^(-1/2); at t = 0.375, u = 2
        let law = ForcingLaw::power(3.0, 0.0, 1.0).unwrap();
        let sol = closed_trajectory(&law, 1.0).unwrap();
        assert_relative_eq!(sol.eval(0.375).unwrap(), 2.0, max_relative = 1e-12);
    }

    #[test]
    fn conservation_of_phi_along_closed_trajectory() {
        let law = ForcingLaw::power(2.5, 0.0, 1.5).unwrap();
        let sol = closed_trajectory(&law, 0.7).unwrap();
        let reference = law.phi(0.7).unwrap();
        for i in 1..40 {
            let t = sol.t_inf * (i as f64) / 41.0;
            let u = sol.eval(t).unwrap();
            let value = law.phi(u).unwrap() + law.lambda * t;
            assert_relative_eq!(value, reference, max_relative = 1e-10);
        }
    }

    #[test]
    fn numeric_blowup_matches_closed_form() {
        let law = ForcingLaw::power(2.0, 0.0, 1.0).unwrap();
        let est = integrate_until_blowup(&law, 1.0, StepControl::default()).unwrap();
        assert_relative_eq!(est.t_est, 1.0, epsilon = 1e-6);
        assert_relative_eq!(est.lambda_fit, 1.0, max_relative = 1e-5);
    }

    #[test]
    fn numeric_blowup_custom_law() {
        let law = ForcingLaw::custom("cubic-shift", |s| (1.0 + s).powi(3), 1.0).unwrap();
        let est = integrate_until_blowup(&law, 1e-12, StepControl::default()).unwrap();
        assert_relative_eq!(est.t_est, 0.5, epsilon = 1e-6);
    }

    #[test]
    fn linear_growth_reports_cap_not_reached() {
        let law = ForcingLaw::power(1.0, 0.0, 1.0).unwrap();
        let err = integrate_until_blowup(&law, 1.0, StepControl::default()).unwrap_err();
        assert!(matches!(err, Error::CapNotReached { .. }), "{err:?}");
    }

    #[test]
    fn numeric_matches_closed_form_pointwise() {
        let law = ForcingLaw::power(2.0, 0.0, 1.0).unwrap();
        let est = integrate_until_blowup(&law, 1.0, StepControl::default()).unwrap();
        let sol = closed_trajectory(&law, 1.0).unwrap();
        for (&t, &u) in est.path.t.iter().zip(&est.path.y) {
            if u <= 1e6 {
                let exact = sol.eval(t).unwrap();
                assert_relative_eq!(u, exact, max_relative = 1e-7);
            }
        }
    }

    #[test]
    fn blowup_time_monotone_in_u0_and_lambda() {
        let mut prev = f64::INFINITY;
        for &u0 in &[0.5, 1.0, 2.0, 4.0, 8.0] {
            let law = ForcingLaw::power(2.0, 0.0, 1.0).unwrap();
            let t = blowup_time(&law, u0).unwrap();
            assert!(t < prev);
            prev = t;
        }
        let mut prev = f64::INFINITY;
        for &lambda in &[0.5, 1.0, 2.0, 4.0] {
            let law = ForcingLaw::power(2.0, 0.0, lambda).unwrap();
            let t = blowup_time(&law, 1.0).unwrap();
            assert!(t < prev);
            prev = t;
        }
    }

    #[test]
    fn hermite_path_tracks_trajectory_between_steps() {
        let law = ForcingLaw::power(2.0, 0.0, 1.0).unwrap();
        let est = integrate_until_blowup(&law, 1.0, StepControl::default()).unwrap();
        let sol = closed_trajectory(&law, 1.0).unwrap();
        for i in 1..50 {
            let t = 0.9 * (i as f64) / 50.0;
            assert_relative_eq!(est.path.eval(t), sol.eval(t).unwrap(), max_relative = 1e-7);
        }
    }
}
