//! Benchmark objectives and noise oracles.
//!
//! Two one-dimensional objectives (quadratic, Huber), the symmetric
//! heavy-tailed density `p(t) = 3 / (4 (1 + |t|)^2.5)` sampled by closed-form
//! CDF inversion, the three-point discrete law `{-A, 0, +A}`, and the two
//! adversarial oracles that slow down AdaGrad (first-step kick) and spoil
//! AdaGradD (last-step kick keyed on a deterministic reference run).
//!
//! All noise is additive on the gradient: `stochastic grad = grad + sample`.

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::optimizers::Trajectory;

/// Huber loss value: `x^2/2` inside `|x| <= nu`, linear with slope `nu` outside.
///
/// ```
/// assert_eq!(clipgrad::problems::huber_value(0.5, 0.5).unwrap(), 0.125);
/// assert_eq!(clipgrad::problems::huber_value(2.0, 0.5).unwrap(), 0.875);
/// ```
pub fn huber_value(x: f64, nu: f64) -> Result<f64> {
    check_huber_args(x, nu)?;
    if x.abs() <= nu {
        Ok(0.5 * x * x)
    } else {
        Ok(nu * (x.abs() - 0.5 * nu))
    }
}

/// Huber loss derivative: `x` inside, `nu * sign(x)` outside; `|result| <= nu`.
pub fn huber_grad(x: f64, nu: f64) -> Result<f64> {
    check_huber_args(x, nu)?;
    if x.abs() <= nu {
        Ok(x)
    } else {
        Ok(nu * x.signum())
    }
}

fn check_huber_args(x: f64, nu: f64) -> Result<()> {
    if !x.is_finite() {
        return Err(invalid(format!("huber: non-finite x = {x}")));
    }
    if !(nu > 0.0) || !nu.is_finite() {
        return Err(invalid(format!("huber: nu must be positive, got {nu}")));
    }
    Ok(())
}

/// Gradient of `f(x) = x^2 / 2`: the identity. `L = 1`, minimizer 0.
pub fn quadratic_grad(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(invalid(format!("quadratic: non-finite x = {x}")));
    }
    Ok(x)
}

/// A one-dimensional objective with exact gradient and known minimizer.
#[derive(Clone, Debug, PartialEq)]
pub enum Objective {
    /// `f(x) = x^2 / 2`.
    Quadratic,
    /// Huber loss with transition at `|x| = nu`.
    Huber { nu: f64 },
}

impl Objective {
    pub fn huber(nu: f64) -> Result<Self> {
        if !(nu > 0.0) || !nu.is_finite() {
            return Err(invalid(format!("huber objective: nu must be positive, got {nu}")));
        }
        Ok(Objective::Huber { nu })
    }

    pub fn dim(&self) -> usize {
        1
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Objective::Quadratic => 0.5 * x[0] * x[0],
            Objective::Huber { nu } => huber_value(x[0], *nu).unwrap_or(f64::NAN),
        }
    }

    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Objective::Quadratic => vec![x[0]],
            Objective::Huber { nu } => vec![huber_grad(x[0], *nu).unwrap_or(f64::NAN)],
        }
    }

    /// Smoothness constant; both built-ins have `L = 1`.
    pub fn smoothness(&self) -> f64 {
        1.0
    }

    pub fn optimum(&self) -> Vec<f64> {
        vec![0.0]
    }

    pub fn f_star(&self) -> f64 {
        0.0
    }
}

/// Magnitude of the heavy-tail draw for a uniform `u` in the open interval (0,1).
///
/// The density `p(t) = 3 / (4 (1 + |t|)^2.5)` has the symmetric tail
/// `P{|xi| > t} = (1 + t)^(-3/2)`, so with `v = 2 min(u, 1-u)` the magnitude
/// is `v^(-2/3) - 1` and the sign comes from which half of (0,1) `u` fell in.
///
/// ```
/// let x = clipgrad::problems::heavy_tail_inverse_cdf(0.75);
/// assert!((x - (0.5f64.powf(-2.0 / 3.0) - 1.0)).abs() < 1e-15);
/// assert_eq!(clipgrad::problems::heavy_tail_inverse_cdf(0.5), 0.0);
/// ```
pub fn heavy_tail_inverse_cdf(u: f64) -> f64 {
    debug_assert!(u > 0.0 && u < 1.0);
    let v = 2.0 * u.min(1.0 - u);
    let mag = v.powf(-2.0 / 3.0) - 1.0;
    if u >= 0.5 {
        mag
    } else {
        -mag
    }
}

/// One draw from the heavy-tail density. The alpha-th absolute moment is
/// finite for `alpha < 1.5` and infinite from 1.5 on.
pub fn heavy_tail_sample<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // rng gives [0,1); reject 0 to honor the open-interval contract.
    let u = loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            break u;
        }
    };
    heavy_tail_inverse_cdf(u)
}

/// `P{|xi| > t}` for the heavy-tail density, `t >= 0`.
pub fn heavy_tail_abs_tail(t: f64) -> f64 {
    (1.0 + t).powf(-1.5)
}

/// CDF of the heavy-tail density.
pub fn heavy_tail_cdf(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 - 0.5 * heavy_tail_abs_tail(t)
    } else {
        0.5 * heavy_tail_abs_tail(-t)
    }
}

/// `E |xi|^alpha` for the heavy-tail density, by deterministic quadrature.
///
/// Parametrized through the tail variable `v = P{|xi| > t}` and substituted
/// `v = s^6`, the moment is the smooth integral
/// `int_0^1 6 s^(5 - 4 alpha) (1 - s^4)^alpha ds`, which Simpson's rule
/// handles to near machine precision. The integrand endpoint stays finite
/// for `alpha <= 1.45`; the moment itself diverges at `alpha = 1.5`.
pub fn heavy_tail_abs_moment(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.45) {
        return Err(invalid(format!(
            "heavy-tail moment certified only for alpha in (0, 1.45], got {alpha}"
        )));
    }
    let f = |s: f64| {
        if s <= 0.0 {
            if 5.0 - 4.0 * alpha > 0.0 {
                0.0
            } else {
                6.0 // exponent is exactly 0 at alpha = 1.25
            }
        } else {
            6.0 * s.powf(5.0 - 4.0 * alpha) * (1.0 - s.powi(4)).powf(alpha)
        }
    };
    Ok(simpson(f, 0.0, 1.0, 1 << 20))
}

/// Composite Simpson's rule with `n` (even) intervals.
pub(crate) fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    assert!(n >= 2 && n.is_multiple_of(2));
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// One draw from the zero-mean three-point law `{-a, 0, +a}` with
/// `P{+-a} = 1/(2 a^2)`; the second moment is exactly 1.
pub fn three_point_sample<R: Rng + ?Sized>(a: f64, rng: &mut R) -> Result<f64> {
    if !(a >= 1.0) || !a.is_finite() {
        return Err(invalid(format!(
            "three-point amplitude must satisfy a >= 1, got {a}"
        )));
    }
    let p = 1.0 / (2.0 * a * a);
    let u: f64 = rng.random();
    Ok(if u < p {
        -a
    } else if u < 2.0 * p {
        a
    } else {
        0.0
    })
}

/// Additive gradient-noise oracle, keyed on the step index.
#[derive(Clone, Debug, PartialEq)]
pub enum NoiseOracle {
    None,
    /// `sigma * xi` with `xi` from the heavy-tail density, every step.
    HeavyTail { sigma: f64 },
    /// First-step three-point kick `-sigma * xi_0`; zero afterwards.
    AdvAdaGrad { sigma: f64, amplitude: f64 },
    /// Last-step three-point kick, active only when the deterministic
    /// reference run ends inside the Huber plateau.
    AdvAdaGradD {
        sigma: f64,
        amplitude: f64,
        kick_step: usize,
        active: bool,
    },
    /// Fixed per-step samples; used by verification reports to condition on
    /// a particular noise realization.
    Scripted { samples: Vec<f64> },
}

impl NoiseOracle {
    /// The additive noise sample for step `t`. Draws from `rng` exactly when
    /// the kind is stochastic at this step, so distinct variants of one
    /// construction stay aligned on shared seeds.
    pub fn sample<R: Rng + ?Sized>(&self, t: usize, rng: &mut R) -> f64 {
        match self {
            NoiseOracle::None => 0.0,
            NoiseOracle::HeavyTail { sigma } => sigma * heavy_tail_sample(rng),
            NoiseOracle::AdvAdaGrad { sigma, amplitude } => {
                if t == 0 {
                    -sigma * three_point_sample(*amplitude, rng).expect("validated amplitude")
                } else {
                    0.0
                }
            }
            NoiseOracle::AdvAdaGradD {
                sigma,
                amplitude,
                kick_step,
                active,
            } => {
                if *active && t == *kick_step {
                    -sigma * three_point_sample(*amplitude, rng).expect("validated amplitude")
                } else {
                    0.0
                }
            }
            NoiseOracle::Scripted { samples } => samples.get(t).copied().unwrap_or(0.0),
        }
    }
}

/// First-step adversarial oracle for AdaGrad on the Huber problem.
///
/// Amplitude `A = (gamma K nu / R + nu) / sigma` with `R = x0 - nu - 2 gamma`.
/// A realized kick inflates `b_0` to roughly `sigma A`, slowing every later
/// step.
pub fn adagrad_adversarial_oracle(
    x0: f64,
    gamma: f64,
    nu: f64,
    sigma: f64,
    k: usize,
) -> Result<NoiseOracle> {
    if !(nu > 0.0 && gamma > nu && x0 - 2.0 * gamma > gamma) {
        return Err(invalid(format!(
            "adversarial AdaGrad oracle requires x0 - 2*gamma > gamma > nu > 0, \
             got x0 = {x0}, gamma = {gamma}, nu = {nu}"
        )));
    }
    if !(sigma > 0.0) {
        return Err(invalid(format!("sigma must be positive, got {sigma}")));
    }
    let r = x0 - nu - 2.0 * gamma;
    let amplitude = (gamma * k as f64 * nu / r + nu) / sigma;
    if amplitude < 1.0 {
        return Err(Error::ConstructionInfeasible(format!(
            "implied amplitude {amplitude} < 1; increase K or decrease sigma"
        )));
    }
    Ok(NoiseOracle::AdvAdaGrad { sigma, amplitude })
}

/// Last-step adversarial oracle for AdaGradD, built from a completed
/// deterministic reference run of `k` steps (the two-pass protocol).
///
/// If the reference endpoint already sits outside the plateau the oracle is
/// identically zero; otherwise step `k - 1` emits `-sigma * xi` with the
/// three-point amplitude `max(1, 2 nu b_{k-1} / (gamma sigma))`.
pub fn adagradd_adversarial_oracle(
    reference: &Trajectory,
    gamma: f64,
    nu: f64,
    sigma: f64,
    k: usize,
) -> Result<NoiseOracle> {
    if k == 0 {
        return Err(invalid("adversarial AdaGradD oracle: K must be >= 1"));
    }
    if reference.records.len() < k + 1 {
        return Err(invalid(format!(
            "reference trajectory has {} records, need at least {} (K + 1)",
            reference.records.len(),
            k + 1
        )));
    }
    if !(sigma > 0.0 && nu > 0.0 && gamma > 0.0) {
        return Err(invalid("adversarial AdaGradD oracle: sigma, nu, gamma must be positive"));
    }
    let x_hat_k = reference.records[k].x;
    let b_last = reference.records[k - 1].b;
    if x_hat_k.abs() > nu {
        return Ok(NoiseOracle::AdvAdaGradD {
            sigma,
            amplitude: 1.0,
            kick_step: k - 1,
            active: false,
        });
    }
    let amplitude = (2.0 * nu * b_last / (gamma * sigma)).max(1.0);
    Ok(NoiseOracle::AdvAdaGradD {
        sigma,
        amplitude,
        kick_step: k - 1,
        active: true,
    })
}

/// An objective paired with a noise oracle.
#[derive(Clone, Debug)]
pub struct StochasticProblem {
    pub objective: Objective,
    pub noise: NoiseOracle,
}

impl StochasticProblem {
    pub fn new(objective: Objective, noise: NoiseOracle) -> Self {
        Self { objective, noise }
    }

    pub fn deterministic(objective: Objective) -> Self {
        Self::new(objective, NoiseOracle::None)
    }

    /// Stochastic gradient at `x` for step `t`, together with the noise
    /// sample that was added (to coordinate 0; all built-ins are 1-d).
    pub fn stochastic_grad<R: Rng + ?Sized>(
        &self,
        x: &[f64],
        t: usize,
        rng: &mut R,
    ) -> (Vec<f64>, f64) {
        let mut g = self.objective.grad(x);
        let sample = self.noise.sample(t, rng);
        g[0] += sample;
        (g, sample)
    }
}
