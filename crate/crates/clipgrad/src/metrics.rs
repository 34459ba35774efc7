//! Sample statistics for ensembles: quartiles, tail-mass diagnostics and
//! percentile bands.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{invalid, Result};

/// Type-7 quantile (linear interpolation between order statistics):
/// `h = (n - 1) p`, `q = x_(floor h) + (h - floor h)(x_(floor h + 1) - x_(floor h))`.
pub fn quantile(samples: &[f64], p: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(invalid("quantile of an empty sample"));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid(format!("quantile level must lie in [0, 1], got {p}")));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("NaN in sample"));
    Ok(quantile_sorted(&sorted, p))
}

fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    // the equality guard keeps +inf-padded columns from producing inf - inf
    if frac == 0.0 || sorted[lo] == sorted[lo + 1] {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

/// `(Q1, Q2, Q3)` type-7 quartiles. Needs at least 4 samples.
pub fn quartiles(samples: &[f64]) -> Result<(f64, f64, f64)> {
    if samples.len() < 4 {
        return Err(invalid(format!(
            "quartiles need at least 4 samples, got {}",
            samples.len()
        )));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("NaN in sample"));
    Ok((
        quantile_sorted(&sorted, 0.25),
        quantile_sorted(&sorted, 0.5),
        quantile_sorted(&sorted, 0.75),
    ))
}

/// Fraction of the sample strictly beyond `Q3 + a * IQR`.
pub fn tail_prob(samples: &[f64], a: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(invalid(format!("tail factor must be positive, got {a}")));
    }
    let (q1, _, q3) = quartiles(samples)?;
    let cutoff = q3 + a * (q3 - q1);
    let count = samples.iter().filter(|v| **v > cutoff).count();
    Ok(count as f64 / samples.len() as f64)
}

/// Standard normal CDF via the complementary error function.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

fn normal_quantile_075() -> f64 {
    // bisection on the CDF; the interval brackets Phi^{-1}(0.75) ~ 0.6745
    let (mut lo, mut hi) = (0.0f64, 2.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if normal_cdf(mid) < 0.75 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Reference tail masses of the standard normal beyond `q_{0.75} + a IQR`
/// for the mild (`a = 1.5`) and extreme (`a = 3`) cutoffs. By symmetry the
/// cutoff is `q_{0.75} (1 + 2a)`.
pub fn normal_tail_references() -> (f64, f64) {
    static REFS: OnceLock<(f64, f64)> = OnceLock::new();
    *REFS.get_or_init(|| {
        let q75 = normal_quantile_075();
        let mild = 1.0 - normal_cdf(q75 * 4.0);
        let extreme = 1.0 - normal_cdf(q75 * 7.0);
        (mild, extreme)
    })
}

/// Tail-heaviness diagnostics of a sample, normalized against the standard
/// normal: `rho = tail_prob(a) / normal_tail(a)` for `a = 1.5` and `a = 3`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TailReport {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub mild_tail_prob: f64,
    pub extreme_tail_prob: f64,
    pub rho_mild: f64,
    pub rho_extreme: f64,
}

/// `(rho_mild, rho_extreme)` alone.
pub fn rho_metrics(samples: &[f64]) -> Result<(f64, f64)> {
    let r = tail_report(samples)?;
    Ok((r.rho_mild, r.rho_extreme))
}

pub fn tail_report(samples: &[f64]) -> Result<TailReport> {
    let (q1, median, q3) = quartiles(samples)?;
    let mild = tail_prob(samples, 1.5)?;
    let extreme = tail_prob(samples, 3.0)?;
    let (mild_ref, extreme_ref) = normal_tail_references();
    Ok(TailReport {
        q1,
        median,
        q3,
        mild_tail_prob: mild,
        extreme_tail_prob: extreme,
        rho_mild: mild / mild_ref,
        rho_extreme: extreme / extreme_ref,
    })
}

/// Per-step quantile bands over an ensemble of equal-length series.
/// `series` is indexed `[replicate][step]`; the result is indexed
/// `[level][step]`. Ragged input is an error; series truncated by failures
/// must be padded by the caller (with `+inf` for loss-like metrics).
pub fn percentile_bands(series: &[Vec<f64>], levels: &[f64]) -> Result<Vec<Vec<f64>>> {
    if series.is_empty() {
        return Err(invalid("percentile bands need at least one series"));
    }
    let len = series[0].len();
    if series.iter().any(|s| s.len() != len) {
        return Err(invalid("percentile bands need equal-length series"));
    }
    for p in levels {
        if !(0.0..=1.0).contains(p) {
            return Err(invalid(format!("band level must lie in [0, 1], got {p}")));
        }
    }
    let mut out = vec![vec![0.0; len]; levels.len()];
    let mut column = vec![0.0; series.len()];
    for step in 0..len {
        for (i, s) in series.iter().enumerate() {
            column[i] = s[step];
        }
        column.sort_by(|a, b| a.partial_cmp(b).expect("NaN in sample"));
        for (band, p) in out.iter_mut().zip(levels) {
            band[step] = quantile_sorted(&column, *p);
        }
    }
    Ok(out)
}

/// Empirical failure probability with a 95% normal-approximation CI:
/// `(p_hat, half_width)` with `half_width = 1.96 sqrt(p_hat (1 - p_hat) / n)`.
pub fn empirical_failure_prob(failures: usize, n: usize) -> Result<(f64, f64)> {
    if n == 0 || failures > n {
        return Err(invalid("need 0 <= failures <= n with n > 0"));
    }
    let p = failures as f64 / n as f64;
    Ok((p, 1.96 * (p * (1.0 - p) / n as f64).sqrt()))
}
