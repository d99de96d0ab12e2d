//! Log-domain arithmetic and chain diagnostics.

use crate::error::{Error, Result};

/// `log((1/R) Σ exp(vᵢ))`, shifted by the maximum for stability.
pub fn log_mean_exp(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput("log_mean_exp"));
    }
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    Ok(max + (sum / values.len() as f64).ln())
}

/// Metropolis-Hastings acceptance test in log domain: `log u < min(0, log_ratio)`.
pub fn mh_accept(log_ratio: f64, u: f64) -> Result<bool> {
    if log_ratio.is_nan() {
        return Err(Error::NanLogRatio);
    }
    debug_assert!((0.0..=1.0).contains(&u));
    Ok(u.ln() < log_ratio.min(0.0))
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Linear-interpolated empirical quantile, `q` in `[0, 1]`.
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

fn autocovariance(xs: &[f64], mean: f64, lag: usize) -> f64 {
    let n = xs.len();
    xs[..n - lag].iter().zip(&xs[lag..]).map(|(a, b)| (a - mean) * (b - mean)).sum::<f64>() / n as f64
}

/// Effective sample size by Geyer's initial positive sequence.
///
/// A constant chain has ESS 1 by convention. The result is clamped to `(0, n]`.
pub fn effective_sample_size(chain: &[f64]) -> Result<f64> {
    let n = chain.len();
    if n < 10 {
        return Err(Error::InsufficientData(format!("ESS needs at least 10 draws, got {n}")));
    }
    if chain.iter().all(|&x| x == chain[0]) {
        return Ok(1.0);
    }
    let m = mean(chain);
    let c0 = autocovariance(chain, m, 0);
    // Sum pairs Γ_k = ρ_{2k} + ρ_{2k+1} while they stay positive.
    let mut tau = -1.0;
    let mut k = 0;
    while 2 * k + 1 < n {
        let gamma = (autocovariance(chain, m, 2 * k) + autocovariance(chain, m, 2 * k + 1)) / c0;
        if gamma <= 0.0 {
            break;
        }
        tau += 2.0 * gamma;
        k += 1;
    }
    let ess = n as f64 / tau.max(f64::MIN_POSITIVE);
    Ok(ess.clamp(f64::MIN_POSITIVE, n as f64))
}
