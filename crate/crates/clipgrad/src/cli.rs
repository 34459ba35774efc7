//! Command-line surface.
//!
//! Exit codes: 0 success, 1 failed verification assertion, 2 config or
//! usage error. The default output directory comes from `--out`, falling
//! back to the `CLIPGRAD_OUT` environment variable, then `./out`.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::RawConfig;
use crate::error::{Error, Result};
use crate::harness::{
    self, compare, run_experiment, ConvexProbe, ExperimentConfig, FailureProbe, NoiseSpec,
    ProblemSpec,
};
use crate::metrics;
use crate::output;
use crate::problems::heavy_tail_sample;

pub const OUT_ENV: &str = "CLIPGRAD_OUT";

#[derive(Parser, Debug)]
#[command(name = "clipgrad", version, about = "Heavy-tailed stochastic optimization experiments")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct CommonArgs {
    /// Output directory (default: $CLIPGRAD_OUT or ./out)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Config overrides, key=value (repeatable, applied after the file)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Override the seed count of the config
    #[arg(long)]
    seeds: Option<usize>,
    /// Worker threads for replicates (default: all cores)
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one experiment config and emit ensemble CSV, bands CSV, SVG and
    /// a JSON summary
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run several configs under common random numbers and emit aligned
    /// band sets
    Compare {
        /// Config files (repeatable); must share problem, steps and seeds
        #[arg(long, required = true)]
        config: Vec<PathBuf>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Check the closed-form predictors and parameter calculators against
    /// simulation
    VerifyTheory {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Check an adversarial slowdown construction end to end
    VerifyFailure {
        /// Which construction: adagrad (first-step kick) or adagradd
        /// (two-pass last-step kick)
        #[arg(long)]
        kind: String,
        #[arg(long)]
        config: PathBuf,
        /// Replays for the activation-frequency check
        #[arg(long, default_value_t = 10_000)]
        replays: usize,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Monte Carlo check of the convex high-probability guarantee
    VerifyConvex {
        /// Horizon K
        #[arg(long, default_value_t = 200)]
        k: usize,
        /// Failure probability delta
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        /// Noise scale (0 disables noise)
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = 0)]
        base_seed: u64,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Sample a noise distribution and emit a histogram CSV plus a tail
    /// report
    NoiseHist {
        /// Noise kind; only pareto_symmetric is histogrammable
        #[arg(long, default_value = "pareto_symmetric")]
        noise: String,
        /// Draw count
        #[arg(long, default_value_t = 1_000_000)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        common: CommonArgs,
    },
}

fn out_dir(common: &CommonArgs) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn load_config(path: &Path, common: &CommonArgs) -> Result<ExperimentConfig> {
    let mut raw = RawConfig::load(path)?;
    for assignment in &common.set {
        raw.apply_set(assignment)?;
    }
    if let Some(seeds) = common.seeds {
        raw.set("seeds", format!("{seeds}"));
    }
    ExperimentConfig::from_raw(&raw)
}

fn configure_jobs(common: &CommonArgs) -> Result<()> {
    if let Some(jobs) = common.jobs {
        if jobs == 0 {
            return Err(Error::Config("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Error::Config(format!("--jobs: {e}")))?;
    }
    Ok(())
}

fn emit_experiment(
    dir: &Path,
    config: &ExperimentConfig,
    ensemble: &harness::TrajectoryEnsemble,
) -> Result<()> {
    let bands = ensemble.bands(config.metric, &config.percentiles)?;
    let prefix = &config.name;
    output::atomic_write(
        &dir.join(format!("{prefix}_ensemble.csv")),
        output::ensemble_csv(ensemble).as_bytes(),
    )?;
    output::atomic_write(
        &dir.join(format!("{prefix}_bands.csv")),
        output::bands_csv(&config.percentiles, &bands).as_bytes(),
    )?;
    output::atomic_write(
        &dir.join(format!("{prefix}_bands.svg")),
        output::bands_svg(prefix, config.metric, &config.percentiles, &bands).as_bytes(),
    )?;
    Ok(())
}

fn failure_probe(config: &ExperimentConfig, replays: usize) -> Result<FailureProbe> {
    let ProblemSpec::Huber { nu } = config.problem else {
        return Err(Error::Config(
            "verify-failure: config must set problem = huber".into(),
        ));
    };
    let sigma = match config.noise {
        NoiseSpec::AdvAdaGrad { sigma } | NoiseSpec::AdvAdaGradD { sigma } => sigma,
        _ => {
            return Err(Error::Config(
                "verify-failure: config must set an adversarial noise kind".into(),
            ))
        }
    };
    let crate::optimizers::BInit::Scalar(b_init) = config.optimizer.b_init else {
        return Err(Error::Config(
            "verify-failure: scalar optimizer.b_init required".into(),
        ));
    };
    Ok(FailureProbe {
        x0: config.x0,
        gamma: config.optimizer.gamma,
        nu,
        b_init,
        sigma,
        k: config.steps,
        replays,
        base_seed: config.base_seed,
    })
}

/// Run the CLI; returns the process exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // clap handles --help/--version with success exits
            let code = if e.exit_code() == 0 { 0 } else { 2 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(all_passed) => {
            if all_passed {
                0
            } else {
                1
            }
        }
        Err(Error::VerificationFailed(msg)) => {
            eprintln!("verification failed: {msg}");
            1
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn dispatch(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { config, common } => {
            configure_jobs(&common)?;
            let experiment = load_config(&config, &common)?;
            let dir = out_dir(&common);
            let ensemble = run_experiment(&experiment)?;
            emit_experiment(&dir, &experiment, &ensemble)?;
            let (report, _) = compare(std::slice::from_ref(&experiment))?;
            output::atomic_write(
                &dir.join(format!("{}_summary.json", experiment.name)),
                output::to_json(&report.methods[0])?.as_bytes(),
            )?;
            println!(
                "{}: {} seeds x {} steps -> {}",
                experiment.name,
                experiment.seeds,
                experiment.steps,
                dir.display()
            );
            Ok(true)
        }
        Command::Compare { config, common } => {
            configure_jobs(&common)?;
            let experiments: Vec<ExperimentConfig> = config
                .iter()
                .map(|p| load_config(p, &common))
                .collect::<Result<_>>()?;
            let dir = out_dir(&common);
            let (report, ensembles) = compare(&experiments)?;
            for (experiment, ensemble) in experiments.iter().zip(&ensembles) {
                emit_experiment(&dir, experiment, ensemble)?;
            }
            output::atomic_write(
                &dir.join("compare.json"),
                output::to_json(&report)?.as_bytes(),
            )?;
            for m in &report.methods {
                println!(
                    "{}: final median {} ({} failed seeds)",
                    m.name, m.final_median, m.failed_seeds
                );
            }
            Ok(true)
        }
        Command::VerifyTheory { common } => {
            let report = harness::verify_theory_report()?;
            print_report(&report);
            output::atomic_write(
                &out_dir(&common).join("verify_theory.json"),
                output::to_json(&report)?.as_bytes(),
            )?;
            Ok(report.pass)
        }
        Command::VerifyFailure {
            kind,
            config,
            replays,
            common,
        } => {
            let experiment = load_config(&config, &common)?;
            let probe = failure_probe(&experiment, replays)?;
            let report = match kind.as_str() {
                "adagrad" => {
                    if !matches!(experiment.noise, NoiseSpec::AdvAdaGrad { .. }) {
                        return Err(Error::Config(
                            "kind adagrad needs noise = adv_adagrad".into(),
                        ));
                    }
                    harness::verify_failure_adagrad(&probe)?
                }
                "adagradd" => {
                    if !matches!(experiment.noise, NoiseSpec::AdvAdaGradD { .. }) {
                        return Err(Error::Config(
                            "kind adagradd needs noise = adv_adagradd".into(),
                        ));
                    }
                    harness::verify_failure_adagradd(&probe)?
                }
                other => {
                    return Err(Error::Config(format!(
                        "--kind must be adagrad or adagradd, got {other:?}"
                    )))
                }
            };
            print_report(&report);
            output::atomic_write(
                &out_dir(&common).join(format!("verify_failure_{kind}.json")),
                output::to_json(&report)?.as_bytes(),
            )?;
            Ok(report.pass)
        }
        Command::VerifyConvex {
            k,
            delta,
            sigma,
            base_seed,
            common,
        } => {
            configure_jobs(&common)?;
            let probe = ConvexProbe {
                k,
                delta,
                seeds: common.seeds.unwrap_or(500),
                base_seed,
                sigma_scale: sigma,
            };
            let report = harness::verify_convex_theorem(&probe)?;
            println!(
                "convex bound: {}/{} seeds within 2R^2 (fraction {}, required {}) -> {}",
                (report.satisfied_fraction * report.seeds as f64).round(),
                report.seeds,
                report.satisfied_fraction,
                report.required_fraction,
                if report.pass { "pass" } else { "FAIL" }
            );
            output::atomic_write(
                &out_dir(&common).join("verify_convex.json"),
                output::to_json(&report)?.as_bytes(),
            )?;
            Ok(report.pass)
        }
        Command::NoiseHist {
            noise,
            n,
            sigma,
            seed,
            common,
        } => {
            if noise != "pareto_symmetric" {
                return Err(Error::Config(format!(
                    "noise-hist supports pareto_symmetric, got {noise:?}"
                )));
            }
            if n < 4 || !(sigma > 0.0) {
                return Err(Error::Config(
                    "noise-hist needs --n >= 4 and --sigma > 0".into(),
                ));
            }
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let norms: Vec<f64> = (0..n)
                .map(|_| (sigma * heavy_tail_sample(&mut rng)).abs())
                .collect();
            let report = metrics::tail_report(&norms)?;
            let dir = out_dir(&common);
            output::atomic_write(
                &dir.join("noise_hist.csv"),
                output::histogram_csv(&norms, 0.0, 20.0 * sigma, 200)?.as_bytes(),
            )?;
            output::atomic_write(
                &dir.join("noise_tail.json"),
                output::to_json(&report)?.as_bytes(),
            )?;
            println!(
                "{n} draws: median {}, rho_mild {}, rho_extreme {}",
                report.median, report.rho_mild, report.rho_extreme
            );
            Ok(true)
        }
    }
}

fn print_report(report: &harness::VerificationReport) {
    println!("{}", report.title);
    for check in &report.checks {
        println!(
            "  [{}] {}: {}",
            if check.pass { "pass" } else { "FAIL" },
            check.name,
            check.detail
        );
    }
    println!("overall: {}", if report.pass { "pass" } else { "FAIL" });
}
