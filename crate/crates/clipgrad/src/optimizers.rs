//! Unified step engines for the AdaGrad-Norm family, the Adam family and SGD.
//!
//! The named methods differ only in three orthogonal switches, so each family
//! is one parameterized engine and the variants are constructor presets:
//!
//! | preset              | delay | clip | eta |
//! |---------------------|-------|------|-----|
//! | `adagrad`           | no    | none | 1   |
//! | `adagradd`          | yes   | none | 1   |
//! | `clip_adagrad`      | no    | yes  | 1   |
//! | `clip_adagradd`     | yes   | yes  | 1   |
//! | `clip_radagrad`     | no    | yes  | free|
//! | `clip_radagradd`    | yes   | yes  | free|
//!
//! `eta = 0` with clipping reduces the AdaGrad family to Clip-SGD with
//! stepsize `gamma / b_init`, bit for bit.
//!
//! The accumulator is tracked as its square and square-rooted for the
//! divisor, so a `T`-step run agrees with the closed-form
//! `sqrt(b^2 + T nu^2)` expressions to the last few ulps. A zero increment
//! leaves the accumulator (and its cached root) untouched.

use rand::Rng;

use crate::clipping::ClipSpec;
use crate::error::{invalid, Error, Result};
use crate::problems::StochasticProblem;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    AdaGradNorm,
    Adam,
    Sgd,
}

/// Initial accumulator: a scalar for the AdaGrad-Norm family, a scalar
/// (broadcast) or per-coordinate vector for the Adam family.
#[derive(Clone, Debug, PartialEq)]
pub enum BInit {
    Scalar(f64),
    Vector(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerConfig {
    pub family: Family,
    pub gamma: f64,
    pub delay: bool,
    pub clip: Option<ClipSpec>,
    /// Reweighting factor on the squared clipped-gradient increment.
    pub eta: f64,
    pub b_init: BInit,
    pub beta1: f64,
    pub beta2: f64,
    pub bias_correction: bool,
}

impl OptimizerConfig {
    fn adagrad_base(gamma: f64, b_init: f64) -> Self {
        Self {
            family: Family::AdaGradNorm,
            gamma,
            delay: false,
            clip: None,
            eta: 1.0,
            b_init: BInit::Scalar(b_init),
            beta1: 0.0,
            beta2: 0.0,
            bias_correction: false,
        }
    }

    /// AdaGrad-Norm: undelayed, unclipped, `eta = 1`.
    pub fn adagrad(gamma: f64, b_init: f64) -> Self {
        Self::adagrad_base(gamma, b_init)
    }

    /// AdaGradD: the divisor is the accumulator value from before the
    /// current gradient.
    pub fn adagradd(gamma: f64, b_init: f64) -> Self {
        Self { delay: true, ..Self::adagrad_base(gamma, b_init) }
    }

    pub fn clip_adagrad(gamma: f64, b_init: f64, clip: ClipSpec) -> Self {
        Self { clip: Some(clip), ..Self::adagrad_base(gamma, b_init) }
    }

    pub fn clip_adagradd(gamma: f64, b_init: f64, clip: ClipSpec) -> Self {
        Self { delay: true, clip: Some(clip), ..Self::adagrad_base(gamma, b_init) }
    }

    pub fn radagrad(gamma: f64, b_init: f64, eta: f64) -> Self {
        Self { eta, ..Self::adagrad_base(gamma, b_init) }
    }

    pub fn radagradd(gamma: f64, b_init: f64, eta: f64) -> Self {
        Self { delay: true, eta, ..Self::adagrad_base(gamma, b_init) }
    }

    pub fn clip_radagrad(gamma: f64, b_init: f64, eta: f64, clip: ClipSpec) -> Self {
        Self { clip: Some(clip), eta, ..Self::adagrad_base(gamma, b_init) }
    }

    pub fn clip_radagradd(gamma: f64, b_init: f64, eta: f64, clip: ClipSpec) -> Self {
        Self { delay: true, clip: Some(clip), eta, ..Self::adagrad_base(gamma, b_init) }
    }

    /// Plain (Clip-)SGD with fixed stepsize `gamma`.
    pub fn sgd(gamma: f64, clip: Option<ClipSpec>) -> Self {
        Self {
            family: Family::Sgd,
            gamma,
            delay: false,
            clip,
            eta: 0.0,
            b_init: BInit::Scalar(1.0),
            beta1: 0.0,
            beta2: 0.0,
            bias_correction: false,
        }
    }

    pub fn adam(gamma: f64, b_init: BInit, beta1: f64, beta2: f64, bias_correction: bool) -> Self {
        Self {
            family: Family::Adam,
            gamma,
            delay: false,
            clip: None,
            eta: 1.0,
            b_init,
            beta1,
            beta2,
            bias_correction,
        }
    }

    /// Clipped reweighted Adam, optionally delayed. Delayed variants do not
    /// carry bias correction; `validate` rejects the combination.
    pub fn clip_radam(
        gamma: f64,
        b_init: BInit,
        beta1: f64,
        beta2: f64,
        eta: f64,
        clip: ClipSpec,
        delay: bool,
    ) -> Self {
        Self {
            family: Family::Adam,
            gamma,
            delay,
            clip: Some(clip),
            eta,
            b_init,
            beta1,
            beta2,
            bias_correction: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(invalid(format!("gamma must be positive, got {}", self.gamma)));
        }
        if !(self.eta >= 0.0) || !self.eta.is_finite() {
            return Err(invalid(format!("eta must be nonnegative, got {}", self.eta)));
        }
        match &self.b_init {
            BInit::Scalar(b) => {
                if !(*b > 0.0) || !b.is_finite() {
                    return Err(invalid(format!("b_init must be positive, got {b}")));
                }
            }
            BInit::Vector(v) => {
                if self.family != Family::Adam {
                    return Err(invalid("vector b_init is only supported by the Adam family"));
                }
                if v.is_empty() || v.iter().any(|b| !(*b > 0.0) || !b.is_finite()) {
                    return Err(invalid("b_init vector must be nonempty and positive"));
                }
            }
        }
        if self.family == Family::Adam {
            for (name, beta) in [("beta1", self.beta1), ("beta2", self.beta2)] {
                if !(0.0..=1.0).contains(&beta) {
                    return Err(invalid(format!("{name} must lie in [0, 1], got {beta}")));
                }
            }
            if self.bias_correction && self.delay {
                return Err(invalid(
                    "bias correction is undefined for delayed Adam variants",
                ));
            }
        } else if self.bias_correction {
            return Err(invalid("bias correction applies to the Adam family only"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
enum Accumulator {
    Scalar { b: f64, b_sq: f64 },
    Vector { b: Vec<f64>, b_sq: Vec<f64> },
}

impl Accumulator {
    /// Scalar summary used in trajectory records: the scalar itself, the
    /// single component in dimension one, or the Euclidean norm otherwise.
    fn summary(&self) -> f64 {
        match self {
            Accumulator::Scalar { b, .. } => *b,
            Accumulator::Vector { b, .. } => {
                if b.len() == 1 {
                    b[0]
                } else {
                    b.iter().map(|v| v * v).sum::<f64>().sqrt()
                }
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct OptimizerState {
    pub x: Vec<f64>,
    acc: Accumulator,
    m: Vec<f64>,
    pub t: usize,
}

impl OptimizerState {
    pub fn new(x0: &[f64], config: &OptimizerConfig) -> Result<Self> {
        config.validate()?;
        if x0.is_empty() || x0.iter().any(|v| !v.is_finite()) {
            return Err(invalid("x0 must be nonempty and finite"));
        }
        let acc = match (&config.family, &config.b_init) {
            (Family::Adam, BInit::Scalar(b)) => Accumulator::Vector {
                b: vec![*b; x0.len()],
                b_sq: vec![b * b; x0.len()],
            },
            (Family::Adam, BInit::Vector(v)) => {
                if v.len() != x0.len() {
                    return Err(invalid(format!(
                        "b_init vector length {} does not match dimension {}",
                        v.len(),
                        x0.len()
                    )));
                }
                Accumulator::Vector {
                    b: v.clone(),
                    b_sq: v.iter().map(|b| b * b).collect(),
                }
            }
            (_, BInit::Scalar(b)) => Accumulator::Scalar { b: *b, b_sq: b * b },
            (_, BInit::Vector(_)) => {
                return Err(invalid("vector b_init is only supported by the Adam family"))
            }
        };
        Ok(Self {
            x: x0.to_vec(),
            acc,
            m: vec![0.0; x0.len()],
            t: 0,
        })
    }

    /// Accumulator scalar summary (the next divisor for delayed variants).
    pub fn b(&self) -> f64 {
        self.acc.summary()
    }

    pub fn momentum(&self) -> &[f64] {
        &self.m
    }

    /// One update with the supplied stochastic gradient. Returns the scalar
    /// summary of the divisor actually used.
    pub fn step(&mut self, config: &OptimizerConfig, stochastic_grad: &[f64]) -> Result<f64> {
        if stochastic_grad.len() != self.x.len() {
            return Err(invalid(format!(
                "gradient dimension {} does not match state dimension {}",
                stochastic_grad.len(),
                self.x.len()
            )));
        }
        if stochastic_grad.iter().any(|v| !v.is_finite()) {
            return Err(Error::Poisoned(self.t));
        }
        let g = match &config.clip {
            Some(spec) => spec.apply(stochastic_grad)?,
            None => stochastic_grad.to_vec(),
        };
        let divisor = match config.family {
            Family::AdaGradNorm => self.step_adagrad_family(config, &g),
            Family::Adam => self.step_adam_family(config, &g),
            Family::Sgd => {
                for (xi, gi) in self.x.iter_mut().zip(&g) {
                    *xi -= config.gamma * gi;
                }
                1.0
            }
        };
        self.t += 1;
        Ok(divisor)
    }

    fn step_adagrad_family(&mut self, config: &OptimizerConfig, g: &[f64]) -> f64 {
        let Accumulator::Scalar { b, b_sq } = &mut self.acc else {
            unreachable!("validated at construction")
        };
        let inc = config.eta * g.iter().map(|v| v * v).sum::<f64>();
        let grow = |b: &mut f64, b_sq: &mut f64| {
            // zero increments leave the cached root untouched so the eta = 0
            // path divides by b_init exactly
            if inc > 0.0 {
                *b_sq += inc;
                *b = b_sq.sqrt();
            }
        };
        if !config.delay {
            grow(b, b_sq);
        }
        let divisor = *b;
        let scale = config.gamma / divisor;
        for (xi, gi) in self.x.iter_mut().zip(g) {
            *xi -= scale * gi;
        }
        if config.delay {
            grow(b, b_sq);
        }
        divisor
    }

    fn step_adam_family(&mut self, config: &OptimizerConfig, g: &[f64]) -> f64 {
        let Accumulator::Vector { b, b_sq } = &mut self.acc else {
            unreachable!("validated at construction")
        };
        for (mi, gi) in self.m.iter_mut().zip(g) {
            *mi = config.beta1 * *mi + (1.0 - config.beta1) * gi;
        }
        let grow = |b: &mut Vec<f64>, b_sq: &mut Vec<f64>| {
            for (bi_sq, gi) in b_sq.iter_mut().zip(g) {
                *bi_sq = config.beta2 * *bi_sq + config.eta * (1.0 - config.beta2) * gi * gi;
            }
            for (bi, bi_sq) in b.iter_mut().zip(b_sq.iter()) {
                *bi = bi_sq.sqrt();
            }
        };
        if !config.delay {
            grow(b, b_sq);
        }
        // m-hat = m / (1 - beta1^(t+1)); b-hat = b / sqrt(1 - beta2^(t+1))
        let (m_corr, b_corr) = if config.bias_correction {
            let p = (self.t + 1) as i32;
            (
                1.0 - config.beta1.powi(p),
                (1.0 - config.beta2.powi(p)).sqrt(),
            )
        } else {
            (1.0, 1.0)
        };
        let divisor_summary = if b.len() == 1 {
            b[0] / b_corr
        } else {
            b.iter().map(|v| (v / b_corr) * (v / b_corr)).sum::<f64>().sqrt()
        };
        for ((xi, mi), bi) in self.x.iter_mut().zip(&self.m).zip(b.iter()) {
            *xi -= config.gamma * (mi / m_corr) / (bi / b_corr);
        }
        if config.delay {
            grow(b, b_sq);
        }
        divisor_summary
    }
}

/// A per-step record of the tracked quantities at iterate `x_t`.
///
/// `b` is the divisor used by the step taken *from* `x_t`; the final record
/// carries the current accumulator value instead (which is exactly the next
/// divisor for delayed variants).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    pub t: usize,
    pub x: f64,
    pub suboptimality: f64,
    pub sq_dist: f64,
    pub grad_norm_sq: f64,
    pub b: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub records: Vec<StepRecord>,
    /// Set when a non-finite gradient aborted the run early.
    pub failed: bool,
}

impl Trajectory {
    pub fn final_record(&self) -> &StepRecord {
        self.records.last().expect("trajectories are nonempty")
    }
}

/// Run `steps` updates from `x0`, recording metrics at every iterate
/// (`steps + 1` records). Deterministic given `(config, x0, rng seed)`.
///
/// A poisoned step flags the trajectory and returns it truncated instead of
/// propagating NaNs.
pub fn run<R: Rng + ?Sized>(
    problem: &StochasticProblem,
    config: &OptimizerConfig,
    x0: &[f64],
    steps: usize,
    rng: &mut R,
) -> Result<Trajectory> {
    let mut state = OptimizerState::new(x0, config)?;
    let optimum = problem.objective.optimum();
    let f_star = problem.objective.f_star();
    let mut records = Vec::with_capacity(steps + 1);
    let snapshot = |state: &OptimizerState, b: f64| {
        let x = &state.x;
        let grad = problem.objective.grad(x);
        StepRecord {
            t: state.t,
            x: x[0],
            suboptimality: problem.objective.value(x) - f_star,
            sq_dist: x
                .iter()
                .zip(&optimum)
                .map(|(a, o)| (a - o) * (a - o))
                .sum(),
            grad_norm_sq: grad.iter().map(|v| v * v).sum(),
            b,
        }
    };
    let mut failed = false;
    for t in 0..steps {
        let (g, _) = problem.stochastic_grad(&state.x, t, rng);
        let before = snapshot(&state, state.b());
        match state.step(config, &g) {
            Ok(divisor) => records.push(StepRecord { b: divisor, ..before }),
            Err(Error::Poisoned(_)) => {
                records.push(before);
                failed = true;
                break;
            }
            Err(e) => return Err(e),
        }
    }
    if !failed {
        records.push(snapshot(&state, state.b()));
    }
    Ok(Trajectory { records, failed })
}
