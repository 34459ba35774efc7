//! Closed forms, iterate brackets and stepsize calculators for the
//! one-dimensional Huber slowdown constructions and the high-probability
//! convergence guarantees.
//!
//! Everything here is pure arithmetic on scenario parameters; the harness
//! checks simulated trajectories against these values.

use crate::error::{invalid, Error, Result};

/// Deterministic Huber scenario: minimize the Huber function with
/// threshold `nu` from `x0 > 0` with true gradients, so every gradient on
/// the linear branch has norm `nu`.
///
/// Valid when `x0 > gamma` (so one plain step cannot overshoot past the
/// mirrored linear branch), `x0 > 0` and `0 < nu < x0 - gamma`.
#[derive(Clone, Copy, Debug)]
pub struct HuberScenario {
    pub x0: f64,
    pub gamma: f64,
    pub nu: f64,
    /// Initial accumulator: `b_{-1}` for the undelayed method, `b_0` for the
    /// delayed one.
    pub b: f64,
}

impl HuberScenario {
    pub fn new(x0: f64, gamma: f64, nu: f64, b: f64) -> Result<Self> {
        if !(x0 > 0.0 && gamma > 0.0 && nu > 0.0 && b > 0.0) {
            return Err(invalid("x0, gamma, nu, b must all be positive"));
        }
        if !(nu < x0 - gamma) {
            return Err(invalid(format!(
                "need nu < x0 - gamma, got nu = {nu}, x0 - gamma = {}",
                x0 - gamma
            )));
        }
        Ok(Self { x0, gamma, nu, b })
    }

    /// `a_0 = b^2 / nu^2`.
    pub fn a0(&self) -> f64 {
        (self.b * self.b) / (self.nu * self.nu)
    }
}

/// Exact iterates of (possibly delayed) AdaGrad-Norm on the Huber scenario,
/// assuming the trajectory stays on the linear branch:
///
/// undelayed: `x_t = x0 - gamma nu sum_{k=0}^{t-1} 1/sqrt(b^2 + (k+1) nu^2)`
/// delayed:   `x_t = x0 - gamma nu sum_{k=0}^{t-1} 1/sqrt(b^2 + k nu^2)`
///
/// Returns `steps + 1` iterates. Errors with the first violating step if an
/// iterate drops to `nu` or below before the last one, since from there the
/// constant-gradient assumption breaks.
pub fn huber_closed_form(s: &HuberScenario, delay: bool, steps: usize) -> Result<Vec<f64>> {
    let b_sq = s.b * s.b;
    let nu_sq = s.nu * s.nu;
    let mut xs = Vec::with_capacity(steps + 1);
    let mut x = s.x0;
    xs.push(x);
    for t in 0..steps {
        let shift = if delay { t as f64 } else { (t + 1) as f64 };
        x -= s.gamma * s.nu / (b_sq + shift * nu_sq).sqrt();
        if x <= s.nu && t + 1 < steps {
            return Err(Error::Validity {
                step: t + 1,
                msg: format!("iterate {x} left the linear branch (nu = {})", s.nu),
            });
        }
        xs.push(x);
    }
    Ok(xs)
}

/// Two-sided bracket on `x_T` for the same trajectories, via integral
/// bounds on the inverse-square-root sums. `T = 0` returns `(x0, x0)`.
///
/// Undelayed, with `a0 = b^2 / nu^2`:
/// `x0 - gamma (1/sqrt(1 + a0) + 2 sqrt(a0 + T) - 2 sqrt(a0 + 1)) <= x_T`
/// `x_T <= x0 - gamma (2 sqrt(a0 + T + 1) - 2 sqrt(a0 + 1))`
///
/// Delayed:
/// `x0 - gamma (1/sqrt(a0) + 2 sqrt(a0 + T - 1) - 2 sqrt(a0)) <= x_T`
/// `x_T <= x0 - gamma (2 sqrt(a0 + T) - 2 sqrt(a0))`
pub fn huber_iterate_bounds(s: &HuberScenario, delay: bool, steps: usize) -> (f64, f64) {
    if steps == 0 {
        return (s.x0, s.x0);
    }
    let a0 = s.a0();
    let t = steps as f64;
    if delay {
        let lower = s.x0 - s.gamma * (1.0 / a0.sqrt() + 2.0 * (a0 + t - 1.0).sqrt() - 2.0 * a0.sqrt());
        let upper = s.x0 - s.gamma * (2.0 * (a0 + t).sqrt() - 2.0 * a0.sqrt());
        (lower, upper)
    } else {
        let lower = s.x0
            - s.gamma * (1.0 / (1.0 + a0).sqrt() + 2.0 * (a0 + t).sqrt() - 2.0 * (a0 + 1.0).sqrt());
        let upper = s.x0 - s.gamma * (2.0 * (a0 + t + 1.0).sqrt() - 2.0 * (a0 + 1.0).sqrt());
        (lower, upper)
    }
}

/// Largest horizon (exclusive threshold) during which the Huber trajectory
/// provably stays on the linear branch.
///
/// Undelayed: any `T` with
/// `T < ((x0 - nu - gamma)^2 + 4 gamma (x0 - nu - gamma) sqrt(a0 + 1)) / (4 gamma^2) + 1`.
/// Delayed: `sqrt(a0)` in place of `sqrt(a0 + 1)` and `+ 2` in place of
/// `+ 1`; additionally requires `b >= nu`.
pub fn huber_stay_threshold(s: &HuberScenario, delay: bool) -> Result<f64> {
    let a0 = s.a0();
    let r = s.x0 - s.nu - s.gamma;
    if delay {
        if s.b < s.nu {
            return Err(invalid(format!(
                "delayed threshold needs b >= nu, got b = {}, nu = {}",
                s.b, s.nu
            )));
        }
        Ok((r * r + 4.0 * s.gamma * r * a0.sqrt()) / (4.0 * s.gamma * s.gamma) + 2.0)
    } else {
        Ok((r * r + 4.0 * s.gamma * r * (a0 + 1.0).sqrt()) / (4.0 * s.gamma * s.gamma) + 1.0)
    }
}

/// Slowdown lower bound for AdaGrad-Norm against the one-kick heavy
/// adversary. With `nu = sqrt(2 epsilon)` and `R = x0 - nu - 2 gamma`,
/// reaching `f(x_K) - f* <= epsilon` with probability `>= 1 - delta` needs
///
/// `K >= max{ (R / gamma) (sigma / (nu sqrt(delta)) - 1), b R / (nu gamma) }`
///
/// Preconditions: `x0 - 2 gamma > gamma > nu > 0` and
/// `sigma / sqrt(epsilon delta) >= 2`.
pub fn adagrad_lower_bound(
    x0: f64,
    gamma: f64,
    b: f64,
    sigma: f64,
    epsilon: f64,
    delta: f64,
) -> Result<f64> {
    if !(epsilon > 0.0 && delta > 0.0 && delta < 1.0 && sigma > 0.0 && gamma > 0.0) {
        return Err(invalid("need epsilon > 0, 0 < delta < 1, sigma > 0, gamma > 0"));
    }
    if sigma / (epsilon * delta).sqrt() < 2.0 {
        return Err(Error::ConstructionInfeasible(
            "need sigma / sqrt(epsilon delta) >= 2".into(),
        ));
    }
    let nu = (2.0 * epsilon).sqrt();
    let r = x0 - nu - 2.0 * gamma;
    if !(r > 0.0) {
        return Err(Error::ConstructionInfeasible(format!(
            "need R = x0 - nu - 2 gamma > 0, got {r}"
        )));
    }
    let first = (r / gamma) * (sigma / (nu * delta.sqrt()) - 1.0);
    let second = b * r / (nu * gamma);
    Ok(first.max(second))
}

/// Slowdown lower bound for the delayed variant against the two-pass
/// adversary. With `R = x0 - nu - gamma`,
///
/// `K >= sigma R / (16 epsilon sqrt(delta))`
///
/// under the precondition `sigma R / (epsilon sqrt(delta)) >= 16 b^2`.
pub fn adagradd_lower_bound(
    x0: f64,
    nu: f64,
    gamma: f64,
    b: f64,
    sigma: f64,
    epsilon: f64,
    delta: f64,
) -> Result<f64> {
    if !(epsilon > 0.0 && delta > 0.0 && delta < 1.0 && sigma > 0.0 && nu > 0.0 && gamma > 0.0) {
        return Err(invalid(
            "need epsilon > 0, 0 < delta < 1, sigma > 0, nu > 0, gamma > 0",
        ));
    }
    let r = x0 - nu - gamma;
    if !(r > 0.0) {
        return Err(Error::ConstructionInfeasible(format!(
            "need R = x0 - nu - gamma > 0, got {r}"
        )));
    }
    if sigma * r / (epsilon * delta.sqrt()) < 16.0 * b * b {
        return Err(Error::ConstructionInfeasible(
            "need sigma R / (epsilon sqrt(delta)) >= 16 b0^2".into(),
        ));
    }
    Ok(sigma * r / (16.0 * epsilon * delta.sqrt()))
}

/// Which of the candidate stepsize terms attained the minimum.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GammaTerm {
    Smoothness,
    Noise,
    NoiseAlt,
}

/// Theoretical parameter choice for one of the high-probability guarantees.
#[derive(Clone, Copy, Debug)]
pub struct TheoryParams {
    pub gamma: f64,
    pub lambda: f64,
    pub eta: f64,
    /// `A = ln(4 (K + 1) / delta)`.
    pub log_factor: f64,
    pub gamma_term: GammaTerm,
}

fn check_common(k: usize, delta: f64, alpha: f64, l: f64, b0: f64) -> Result<f64> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(invalid(format!("delta must lie in (0, 1], got {delta}")));
    }
    if !(alpha > 1.0 && alpha <= 2.0) {
        return Err(invalid(format!("alpha must lie in (1, 2], got {alpha}")));
    }
    if !(l > 0.0 && b0 > 0.0) {
        return Err(invalid("L and b0 must be positive"));
    }
    Ok((4.0 * (k as f64 + 1.0) / delta).ln())
}

/// Parameter choice for the convex high-probability bound on a domain of
/// radius `R`:
///
/// `gamma = min{ b0 / (160 L A),
///              R b0 / (40 * 9^(1/alpha) sigma (K+1)^(1/alpha) A^((alpha-1)/alpha)) }`
/// `lambda = b0 R / (40 gamma A)`, `eta = gamma^2 / R^2`.
///
/// `sigma` here is `(sigma^alpha)^(1/alpha)`; `sigma = 0` makes the noise
/// term infinite and the smoothness term is taken.
pub fn convex_params(
    k: usize,
    delta: f64,
    alpha: f64,
    l: f64,
    r: f64,
    sigma: f64,
    b0: f64,
) -> Result<TheoryParams> {
    let a = check_common(k, delta, alpha, l, b0)?;
    if !(r > 0.0) || sigma < 0.0 {
        return Err(invalid("need R > 0 and sigma >= 0"));
    }
    let term_smooth = b0 / (160.0 * l * a);
    let term_noise = if sigma == 0.0 {
        f64::INFINITY
    } else {
        r * b0
            / (40.0
                * 9.0f64.powf(1.0 / alpha)
                * sigma
                * (k as f64 + 1.0).powf(1.0 / alpha)
                * a.powf((alpha - 1.0) / alpha))
    };
    let (gamma, gamma_term) = if term_smooth <= term_noise {
        (term_smooth, GammaTerm::Smoothness)
    } else {
        (term_noise, GammaTerm::Noise)
    };
    Ok(TheoryParams {
        gamma,
        lambda: b0 * r / (40.0 * gamma * a),
        eta: gamma * gamma / (r * r),
        log_factor: a,
        gamma_term,
    })
}

/// Parameter choice for the nonconvex high-probability bound with initial
/// gap `Delta = f(x0) - f*`:
///
/// `gamma` is the minimum of
///   `b0 / (80 L A)`,
///   `35^(1/alpha) b0 sqrt(Delta)
///      / (432^(1/alpha) 20 sqrt(L) sigma (K+1)^(alpha/(3 alpha - 2)) A^((alpha-1)/alpha))`,
///   `b0 Delta^(alpha/(2 alpha - 1))
///      / (4^((alpha+1)/(2 alpha - 1)) 20^((2 alpha - 2)/(2 alpha - 1))
///         sigma^(2 alpha/(2 alpha - 1)) L^((alpha-1)/(2 alpha - 1))
///         (K+1)^(alpha/(3 alpha - 2)) A^((2 alpha - 2)/(2 alpha - 1)))`,
///
/// `lambda = b0 sqrt(Delta) (K+1)^((1-alpha)/(3 alpha - 2)) / (20 sqrt(L) gamma A)`,
/// `eta = L gamma^2 / Delta`.
pub fn nonconvex_params(
    k: usize,
    delta: f64,
    alpha: f64,
    l: f64,
    gap: f64,
    sigma: f64,
    b0: f64,
) -> Result<TheoryParams> {
    let a = check_common(k, delta, alpha, l, b0)?;
    if !(gap > 0.0) || sigma < 0.0 {
        return Err(invalid("need Delta > 0 and sigma >= 0"));
    }
    let kp1 = k as f64 + 1.0;
    let term1 = b0 / (80.0 * l * a);
    let (term2, term3) = if sigma == 0.0 {
        (f64::INFINITY, f64::INFINITY)
    } else {
        let t2 = 35.0f64.powf(1.0 / alpha) * b0 * gap.sqrt()
            / (432.0f64.powf(1.0 / alpha)
                * 20.0
                * l.sqrt()
                * sigma
                * kp1.powf(alpha / (3.0 * alpha - 2.0))
                * a.powf((alpha - 1.0) / alpha));
        let q = 2.0 * alpha - 1.0;
        let t3 = b0 * gap.powf(alpha / q)
            / (4.0f64.powf((alpha + 1.0) / q)
                * 20.0f64.powf((2.0 * alpha - 2.0) / q)
                * sigma.powf(2.0 * alpha / q)
                * l.powf((alpha - 1.0) / q)
                * kp1.powf(alpha / (3.0 * alpha - 2.0))
                * a.powf((2.0 * alpha - 2.0) / q));
        (t2, t3)
    };
    let (gamma, gamma_term) = if term1 <= term2 && term1 <= term3 {
        (term1, GammaTerm::Smoothness)
    } else if term2 <= term3 {
        (term2, GammaTerm::Noise)
    } else {
        (term3, GammaTerm::NoiseAlt)
    };
    Ok(TheoryParams {
        gamma,
        lambda: b0 * gap.sqrt() * kp1.powf((1.0 - alpha) / (3.0 * alpha - 2.0))
            / (20.0 * l.sqrt() * gamma * a),
        eta: l * gamma * gamma / gap,
        log_factor: a,
        gamma_term,
    })
}

/// Bias and variance bounds for clipping an unbiased estimator with
/// `alpha`-moment at most `sigma^alpha` around a point whose true gradient
/// has norm at most `lambda / 2`:
///
/// `|bias| <= 2^alpha sigma^alpha / lambda^(alpha - 1)`,
/// `E ||clip - mean||^2 <= 18 lambda^(2 - alpha) sigma^alpha`.
pub fn clip_effect_bounds(alpha: f64, sigma_alpha: f64, lambda: f64) -> Result<(f64, f64)> {
    if !(alpha > 1.0 && alpha <= 2.0) {
        return Err(invalid(format!("alpha must lie in (1, 2], got {alpha}")));
    }
    if !(lambda > 0.0) || sigma_alpha < 0.0 {
        return Err(invalid("need lambda > 0 and sigma^alpha >= 0"));
    }
    let bias = 2.0f64.powf(alpha) * sigma_alpha / lambda.powf(alpha - 1.0);
    let variance = 18.0 * lambda.powf(2.0 - alpha) * sigma_alpha;
    Ok((bias, variance))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizers::{run, OptimizerConfig};
    use crate::problems::{Objective, StochasticProblem};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scenario() -> HuberScenario {
        HuberScenario::new(2.0, 0.1, 0.01, 1.0).unwrap()
    }

    #[test]
    fn scenario_validation() {
        assert!(HuberScenario::new(1.0, 0.5, 0.6, 1.0).is_err()); // nu >= x0 - gamma
        assert!(HuberScenario::new(1.0, 0.0, 0.1, 1.0).is_err());
        assert!(HuberScenario::new(-1.0, 0.1, 0.01, 1.0).is_err());
    }

    #[test]
    fn closed_form_matches_simulation_to_1e12() {
        let s = scenario();
        let problem = StochasticProblem::deterministic(Objective::huber(s.nu).unwrap());
        for delay in [false, true] {
            let xs = huber_closed_form(&s, delay, 1000).unwrap();
            let config = if delay {
                OptimizerConfig::adagradd(s.gamma, s.b)
            } else {
                OptimizerConfig::adagrad(s.gamma, s.b)
            };
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let traj = run(&problem, &config, &[s.x0], 1000, &mut rng).unwrap();
            for (rec, x) in traj.records.iter().zip(&xs) {
                assert!(
                    (rec.x - x).abs() < 1e-12,
                    "delay = {delay}, t = {}, sim = {}, closed = {x}",
                    rec.t,
                    rec.x
                );
            }
        }
    }

    #[test]
    fn closed_form_reports_branch_exit() {
        // tiny b and large gamma exit the linear branch quickly
        let s = HuberScenario::new(1.0, 0.5, 0.1, 0.2).unwrap();
        match huber_closed_form(&s, false, 100) {
            Err(crate::Error::Validity { step, .. }) => assert!(step >= 1),
            other => panic!("expected validity error, got {other:?}"),
        }
    }

    #[test]
    fn bounds_bracket_closed_form() {
        let s = scenario();
        for delay in [false, true] {
            let xs = huber_closed_form(&s, delay, 500).unwrap();
            for (t, x) in xs.iter().enumerate() {
                let (lo, hi) = huber_iterate_bounds(&s, delay, t);
                assert!(lo <= x + 1e-12 && *x <= hi + 1e-12, "t = {t}");
            }
        }
    }

    #[test]
    fn bounds_at_zero_are_degenerate() {
        let s = scenario();
        assert_eq!(huber_iterate_bounds(&s, false, 0), (2.0, 2.0));
        assert_eq!(huber_iterate_bounds(&s, true, 0), (2.0, 2.0));
    }

    #[test]
    fn stay_threshold_hand_value() {
        // x0 = 2, gamma = 0.1, nu = 0.01, b = 1: R = 1.89, a0 = 10^4,
        // undelayed threshold = (1.89^2 + 0.756 sqrt(10001)) / 0.04 + 1
        let s = scenario();
        let r: f64 = 1.89;
        let expect = (r * r + 4.0 * 0.1 * r * 10001.0f64.sqrt()) / 0.04 + 1.0;
        let got = huber_stay_threshold(&s, false).unwrap();
        assert!((got - expect).abs() < 1e-9);
        assert!((got - 1980.4).abs() < 0.05);
    }

    #[test]
    fn stay_threshold_is_safe() {
        let s = scenario();
        for delay in [false, true] {
            let thr = huber_stay_threshold(&s, delay).unwrap();
            let t = thr.floor() as usize; // largest horizon below the threshold
            let xs = huber_closed_form(&s, delay, t.min(50_000)).unwrap();
            for x in &xs {
                assert!(*x > s.nu);
            }
        }
    }

    #[test]
    fn delayed_threshold_requires_b_at_least_nu() {
        let s = HuberScenario::new(2.0, 0.1, 0.5, 0.2).unwrap();
        assert!(huber_stay_threshold(&s, true).is_err());
        assert!(huber_stay_threshold(&s, false).is_ok());
    }

    #[test]
    fn adagrad_lower_bound_hand_value() {
        // sigma = 1, epsilon = 0.005 (nu = 0.1), delta = 0.01, gamma = 0.1,
        // x0 = 2, b = 1: R = 1.7, first term = 17 * 99 = 1683, second = 170
        let k = adagrad_lower_bound(2.0, 0.1, 1.0, 1.0, 0.005, 0.01).unwrap();
        assert!((k - 1683.0).abs() < 1e-9);
    }

    #[test]
    fn adagrad_lower_bound_quarter_delta_doubles_leading_term() {
        let k1 = adagrad_lower_bound(2.0, 0.1, 1.0, 1.0, 0.005, 0.01).unwrap();
        let k2 = adagrad_lower_bound(2.0, 0.1, 1.0, 1.0, 0.005, 0.0025).unwrap();
        // (sigma / (nu sqrt(delta))) part doubles; the "- 1" keeps it shy of 2x
        assert!((k2 + 17.0 - 2.0 * (k1 + 17.0)).abs() < 1e-9);
    }

    #[test]
    fn adagrad_lower_bound_preconditions() {
        // sigma too small relative to sqrt(epsilon delta)
        assert!(adagrad_lower_bound(2.0, 0.1, 1.0, 1e-3, 0.5, 0.9).is_err());
        // R <= 0
        assert!(adagrad_lower_bound(0.3, 0.1, 1.0, 1.0, 0.005, 0.01).is_err());
    }

    #[test]
    fn adagradd_lower_bound_hand_value() {
        // x0 = 2, nu = 0.1, gamma = 0.1: R = 1.8,
        // K >= 1.8 / (16 * 0.005 * 0.1) = 225
        let k = adagradd_lower_bound(2.0, 0.1, 0.1, 1.0, 1.0, 0.005, 0.01).unwrap();
        assert!((k - 225.0).abs() < 1e-9);
    }

    #[test]
    fn adagradd_lower_bound_quadrupling_delta_halves() {
        let k1 = adagradd_lower_bound(2.0, 0.1, 0.1, 1.0, 1.0, 0.005, 0.01).unwrap();
        let k2 = adagradd_lower_bound(2.0, 0.1, 0.1, 1.0, 1.0, 0.005, 0.04).unwrap();
        assert!((k1 - 2.0 * k2).abs() < 1e-9);
    }

    #[test]
    fn adagradd_lower_bound_precondition() {
        // large b0^2 violates sigma R / (epsilon sqrt(delta)) >= 16 b0^2
        assert!(adagradd_lower_bound(2.0, 0.1, 0.1, 20.0, 1.0, 0.005, 0.01).is_err());
    }

    #[test]
    fn convex_params_identities() {
        let p = convex_params(999, 0.1, 1.25, 1.0, 2.0, 1.2, 3.0).unwrap();
        let a = (4.0 * 1000.0 / 0.1f64).ln();
        assert!((p.log_factor - a).abs() < 1e-12);
        // lambda gamma A = b0 R / 40 and eta R^2 = gamma^2, to a few ulps
        assert!((p.lambda * p.gamma * p.log_factor - 3.0 * 2.0 / 40.0).abs() < 1e-12);
        assert!((p.eta * 4.0 - p.gamma * p.gamma).abs() < 1e-15);
        // at this horizon the noise term is active
        assert_eq!(p.gamma_term, GammaTerm::Noise);
        let noise = 2.0 * 3.0
            / (40.0 * 9.0f64.powf(0.8) * 1.2 * 1000.0f64.powf(0.8) * a.powf(0.2));
        assert!((p.gamma - noise).abs() < 1e-15);
    }

    #[test]
    fn convex_params_alpha_two_example() {
        // K = 999, delta = 0.01, b0 = R = L = sigma = 1, alpha = 2:
        // A = ln(400000), noise term 1/(40 * 3 * sqrt(1000 A)) wins
        let p = convex_params(999, 0.01, 2.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        assert!((p.log_factor - 400000.0f64.ln()).abs() < 1e-12);
        assert!((p.log_factor - 12.8992).abs() < 1e-4);
        let term2 = 1.0 / (40.0 * 3.0 * 1000.0f64.sqrt() * p.log_factor.sqrt());
        assert!((p.gamma - term2).abs() < 1e-12);
        assert!((p.gamma - 7.33731e-5).abs() < 1e-10);
        assert!(p.gamma < 1.0 / (160.0 * p.log_factor));
        assert_eq!(p.gamma_term, GammaTerm::Noise);
    }

    #[test]
    fn convex_gamma_monotone_in_horizon_and_confidence() {
        let base = convex_params(200, 0.1, 1.25, 1.0, 2.0, 1.0, 3.0).unwrap().gamma;
        let longer = convex_params(400, 0.1, 1.25, 1.0, 2.0, 1.0, 3.0).unwrap().gamma;
        let stricter = convex_params(200, 0.05, 1.25, 1.0, 2.0, 1.0, 3.0).unwrap().gamma;
        assert!(longer <= base && stricter <= base);
    }

    #[test]
    fn convex_params_zero_sigma_takes_smoothness_term() {
        let p = convex_params(999, 0.1, 1.25, 1.0, 2.0, 0.0, 3.0).unwrap();
        assert_eq!(p.gamma_term, GammaTerm::Smoothness);
        assert!((p.gamma - 3.0 / (160.0 * p.log_factor)).abs() < 1e-15);
    }

    #[test]
    fn nonconvex_params_identities() {
        let p = nonconvex_params(999, 0.1, 1.25, 1.0, 2.0, 1.2, 3.0).unwrap();
        let a = p.log_factor;
        let kp1: f64 = 1000.0;
        // lambda identity: 20 sqrt(L) gamma A lambda = b0 sqrt(Delta) (K+1)^((1-alpha)/(3alpha-2))
        let lhs = 20.0 * p.gamma * a * p.lambda;
        let rhs = 3.0 * 2.0f64.sqrt() * kp1.powf((1.0 - 1.25) / (3.0 * 1.25 - 2.0));
        assert!((lhs - rhs).abs() < 1e-12 * rhs.abs());
        assert!((p.eta - p.gamma * p.gamma / 2.0).abs() < 1e-15);
        // gamma equals the minimum of the three documented terms
        let term1 = 3.0 / (80.0 * a);
        assert!(p.gamma <= term1 + 1e-15);
    }

    #[test]
    fn clip_effect_hand_values() {
        // alpha = 2 reduces to 4 sigma^2 / lambda and 18 sigma^2
        let (bias, var) = clip_effect_bounds(2.0, 0.25, 2.0).unwrap();
        assert!((bias - 0.5).abs() < 1e-15);
        assert!((var - 4.5).abs() < 1e-15);
        assert!(clip_effect_bounds(1.0, 1.0, 1.0).is_err());
    }
}
