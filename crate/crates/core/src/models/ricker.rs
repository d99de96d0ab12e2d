//! Ricker population model with Poisson observations.
//!
//! ```text
//! x_{t+1} = r x_t exp(-x_t + ε_t),   ε_t ~ N(0, σ²)
//! y_{t+1} ~ Poisson(φ x_{t+1})
//! ```
//! Sampling coordinates are `θ = [log r, log φ, log σ]`.

use std::sync::OnceLock;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::models::TimeSeries;
use crate::rng::RngStream;
use crate::smc::StateSpaceModel;
use crate::types::ParameterPoint;

/// Ground truth used to generate the synthetic Ricker data set.
pub const RICKER_THETA_TRUE: [f64; 3] = [3.80, 2.30, -1.20];
pub const RICKER_X0: f64 = 7.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RickerParams {
    pub r: f64,
    pub phi: f64,
    pub sigma: f64,
}

impl RickerParams {
    pub fn from_log(log_r: f64, log_phi: f64, log_sigma: f64) -> Result<Self> {
        let p = Self { r: log_r.exp(), phi: log_phi.exp(), sigma: log_sigma.exp() };
        if !(p.r > 0.0 && p.phi > 0.0 && p.sigma > 0.0)
            || !(p.r.is_finite() && p.phi.is_finite() && p.sigma.is_finite())
        {
            return Err(Error::InvalidParameter(format!("Ricker parameters out of range: {p:?}")));
        }
        Ok(p)
    }

    pub fn from_theta(theta: &ParameterPoint) -> Result<Self> {
        if theta.dim() != 3 {
            return Err(Error::DimensionMismatch { expected: 3, got: theta.dim() });
        }
        Self::from_log(theta[0], theta[1], theta[2])
    }

    pub fn theta(&self) -> [f64; 3] {
        [self.r.ln(), self.phi.ln(), self.sigma.ln()]
    }
}

/// One latent step with a given noise value.
#[inline]
pub fn ricker_step(x: f64, r: f64, eps: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    r * x * (-x + eps).exp()
}

pub fn ricker_propagate(x: f64, params: &RickerParams, rng: &mut RngStream) -> f64 {
    let eps: f64 = params.sigma * rng.sample::<f64, _>(StandardNormal);
    ricker_step(x, params.r, eps)
}

fn ln_factorial_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(1024);
        let mut acc = 0.0;
        t.push(0.0);
        for k in 1..1024 {
            acc += (k as f64).ln();
            t.push(acc);
        }
        t
    })
}

/// `ln(k!)`, tabulated below 1024 and by Stirling's series above.
pub fn ln_factorial(k: u64) -> f64 {
    let table = ln_factorial_table();
    if (k as usize) < table.len() {
        return table[k as usize];
    }
    let n = k as f64;
    n * n.ln() - n + 0.5 * (2.0 * std::f64::consts::PI * n).ln() + 1.0 / (12.0 * n) - 1.0 / (360.0 * n.powi(3))
}

#[inline]
fn poisson_logpmf(y: u64, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return if y == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    y as f64 * lambda.ln() - lambda - ln_factorial(y)
}

/// Poisson(φx) log-pmf at the count `y`.
pub fn ricker_obs_logpdf(y: f64, x: f64, params: &RickerParams) -> Result<f64> {
    let count = as_count(y)?;
    Ok(poisson_logpmf(count, params.phi * x))
}

fn as_count(y: f64) -> Result<u64> {
    if y < 0.0 || y.fract() != 0.0 || !y.is_finite() {
        return Err(Error::InvalidParameter(format!("Ricker observation must be a non-negative integer, got {y}")));
    }
    Ok(y as u64)
}

/// Simulates `t_len` observations at integer times starting from `x0`.
pub fn ricker_simulate(params: &RickerParams, t_len: usize, x0: f64, rng: &mut RngStream) -> Result<TimeSeries> {
    if t_len == 0 {
        return Err(Error::EmptyInput("simulation length"));
    }
    let mut x = x0;
    let mut ys = Vec::with_capacity(t_len);
    for _ in 0..t_len {
        x = ricker_propagate(x, params, rng);
        ys.push(sample_poisson(params.phi * x, rng) as f64);
    }
    TimeSeries::unit_spaced(ys, x0)
}

fn sample_poisson(lambda: f64, rng: &mut RngStream) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    rand_distr::Poisson::new(lambda).map(|d| rng.sample(d) as u64).unwrap_or(0)
}

/// State-space model adapter used by the particle filter.
#[derive(Debug, Clone, Copy, Default)]
pub struct RickerModel;

impl StateSpaceModel for RickerModel {
    type Params = RickerParams;

    fn n_params(&self) -> usize {
        3
    }

    fn param_names(&self) -> Vec<String> {
        ["log_r", "log_phi", "log_sigma"].map(String::from).to_vec()
    }

    fn params(&self, theta: &ParameterPoint) -> Result<RickerParams> {
        RickerParams::from_theta(theta)
    }

    fn validate_data(&self, data: &TimeSeries) -> Result<()> {
        data.values().iter().try_for_each(|&y| as_count(y).map(|_| ()))
    }

    fn propagate(&self, p: &RickerParams, x: f64, _dt: f64, rng: &mut RngStream) -> f64 {
        ricker_propagate(x, p, rng)
    }

    fn log_weight(&self, p: &RickerParams, data: &TimeSeries, t: usize, x: f64, _x_prev: f64) -> f64 {
        if !x.is_finite() {
            return f64::NEG_INFINITY;
        }
        poisson_logpmf(data.values()[t] as u64, p.phi * x)
    }

    fn simulate(&self, p: &RickerParams, times: &[f64], x0: f64, rng: &mut RngStream) -> Result<TimeSeries> {
        let mut x = x0;
        let ys = times
            .iter()
            .map(|_| {
                x = ricker_propagate(x, p, rng);
                sample_poisson(p.phi * x, rng) as f64
            })
            .collect();
        TimeSeries::new(times.to_vec(), ys, x0)
    }
}
