//! Binomial interval arithmetic for benchmark reports.

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("no episodes to aggregate")]
    EmptyInput,
    #[error("correction rate undefined: no episode had an inaccurate first move")]
    EmptyDenominator,
    #[error("invalid arguments: {0}")]
    InvalidArguments(String),
}

/// z for a two-sided 95% normal interval.
pub const Z_95: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateCi {
    pub successes: u64,
    pub n: u64,
    pub rate: f64,
    pub halfwidth: f64,
}

/// Success rate with the normal-approximation 95% half-width
/// `1.96 * sqrt(p(1-p)/n)`.
pub fn success_rate_ci(successes: u64, n: u64) -> Result<RateCi, StatsError> {
    if n == 0 {
        return Err(StatsError::EmptyInput);
    }
    if successes > n {
        return Err(StatsError::InvalidArguments(format!("{successes} successes out of {n}")));
    }
    let rate = successes as f64 / n as f64;
    let halfwidth = Z_95 * (rate * (1.0 - rate) / n as f64).sqrt();
    Ok(RateCi {
        successes,
        n,
        rate,
        halfwidth,
    })
}

/// Inverse of the regularized incomplete beta function in `x`, by bisection.
fn beta_quantile(p: f64, a: f64, b: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if beta_reg(a, b, mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Exact (Clopper-Pearson) two-sided binomial interval for `k` successes in `n` trials.
pub fn clopper_pearson(k: u64, n: u64, confidence: f64) -> Result<(f64, f64), StatsError> {
    if n == 0 || k > n || !(confidence > 0.0 && confidence < 1.0) {
        return Err(StatsError::InvalidArguments(format!(
            "k={k}, n={n}, confidence={confidence}"
        )));
    }
    let tail = (1.0 - confidence) / 2.0;
    let nf = n as f64;
    let kf = k as f64;
    let lo = if k == 0 {
        0.0
    } else if k == n {
        tail.powf(1.0 / nf)
    } else {
        beta_quantile(tail, kf, nf - kf + 1.0)
    };
    let hi = if k == n {
        1.0
    } else if k == 0 {
        1.0 - tail.powf(1.0 / nf)
    } else {
        beta_quantile(1.0 - tail, kf + 1.0, nf - kf)
    };
    Ok((lo.clamp(0.0, 1.0), hi.clamp(0.0, 1.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectionRate {
    pub corrected: u64,
    pub inaccurate_first_moves: u64,
    pub rate: f64,
    pub ci: (f64, f64),
}

/// `corrected / inaccurate` with a 95% Clopper-Pearson interval.
pub fn correction_rate_counts(corrected: u64, inaccurate: u64) -> Result<CorrectionRate, StatsError> {
    if inaccurate == 0 {
        return Err(StatsError::EmptyDenominator);
    }
    let ci = clopper_pearson(corrected, inaccurate, 0.95)?;
    Ok(CorrectionRate {
        corrected,
        inaccurate_first_moves: inaccurate,
        rate: corrected as f64 / inaccurate as f64,
        ci,
    })
}
