//! Stochastic optimization under heavy-tailed gradient noise: a family of
//! adaptive methods (AdaGrad-Norm, delayed and reweighted variants, Adam)
//! with optional gradient clipping, plus the analysis tooling to study when
//! adaptivity alone fails and clipping rescues high-probability convergence.
//!
//! The crate has three layers:
//!
//! * primitives: [`problems`] (objectives and noise oracles), [`clipping`],
//!   [`optimizers`] (one step engine covering the whole variant lattice);
//! * calculators: [`theory`] (closed forms, iterate brackets, stay
//!   thresholds, lower bounds, theorem parameter choices) and [`metrics`]
//!   (quantiles, tail-heaviness ratios, percentile bands);
//! * experiments: [`harness`] (seeded parallel replicates, comparisons,
//!   verification probes), [`config`], [`output`] and [`cli`].
//!
//! A minimal run: clipped, reweighted, delayed AdaGrad-Norm on the quadratic
//! with symmetric Pareto-tailed noise.
//!
//! ```
//! use clipgrad::clipping::ClipSpec;
//! use clipgrad::optimizers::{run, OptimizerConfig};
//! use clipgrad::problems::{NoiseOracle, Objective, StochasticProblem};
//! use rand::SeedableRng;
//!
//! let problem = StochasticProblem::new(
//!     Objective::Quadratic,
//!     NoiseOracle::HeavyTail { sigma: 1.0 },
//! );
//! let optimizer = OptimizerConfig::clip_radagradd(
//!     0.1,                            // stepsize gamma
//!     3.0,                            // initial accumulator b_0
//!     0.01,                           // reweighting factor eta
//!     ClipSpec::global(0.5).unwrap(), // clip radius lambda
//! );
//! let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
//! let traj = run(&problem, &optimizer, &[2.0], 1000, &mut rng).unwrap();
//! assert_eq!(traj.records.len(), 1001);
//! assert!(traj.final_record().sq_dist < 4.0);
//! ```
//!
//! The delayed variants divide by the accumulator value from *before* the
//! current gradient, which makes the stepsize independent of the current
//! noise draw; the reweighting factor `eta` scales the squared clipped
//! gradient inside the accumulator, so `eta = 0` recovers Clip-SGD exactly
//! (bit for bit) and `eta = 1` recovers Clip-AdaGradD.

// validation uses `!(x > 0.0)` on purpose: the negation also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod clipping;
pub mod config;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod optimizers;
pub mod output;
pub mod problems;
pub mod theory;

pub use error::{Error, Result};
