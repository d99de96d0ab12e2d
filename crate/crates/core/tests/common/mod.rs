#![allow(dead_code)]

use adamcmc::models::LinearGaussian;
use adamcmc::TimeSeries;

/// Exact log-likelihood of the linear-Gaussian model by the Kalman filter.
pub fn kalman_loglik(m: &LinearGaussian, mu: f64, data: &TimeSeries) -> f64 {
    let mut mean = data.x0();
    let mut var = 0.0;
    let mut ll = 0.0;
    for &y in data.values() {
        mean *= m.rho;
        var = m.rho * m.rho * var + m.sigma_x * m.sigma_x;
        let s = var + m.sigma_y * m.sigma_y;
        let resid = y - mu - mean;
        ll += -0.5 * (2.0 * std::f64::consts::PI * s).ln() - 0.5 * resid * resid / s;
        let gain = var / s;
        mean += gain * resid;
        var *= 1.0 - gain;
    }
    ll
}

/// Posterior mean and sd of `μ` under a `N(prior_mean, prior_sd²)` prior.
///
/// The log-likelihood is quadratic in `μ`, so three Kalman evaluations pin it down.
pub fn lg_posterior(m: &LinearGaussian, data: &TimeSeries, prior_mean: f64, prior_sd: f64) -> (f64, f64) {
    let f = |mu: f64| kalman_loglik(m, mu, data);
    let (a, b, c) = (f(-1.0), f(0.0), f(1.0));
    let curvature = a - 2.0 * b + c; // = -precision
    let slope = 0.5 * (c - a);
    let lik_prec = -curvature;
    let lik_mean = slope / lik_prec;
    let prec = lik_prec + 1.0 / (prior_sd * prior_sd);
    let mean = (lik_prec * lik_mean + prior_mean / (prior_sd * prior_sd)) / prec;
    (mean, prec.sqrt().recip())
}

pub fn lg_data(m: &LinearGaussian, mu: f64, t_len: usize, seed: u64) -> TimeSeries {
    use adamcmc::{ParameterPoint, RngStream, StateSpaceModel};
    let theta = ParameterPoint::new(vec![mu]).unwrap();
    let p = m.params(&theta).unwrap();
    let times: Vec<f64> = (1..=t_len).map(|t| t as f64).collect();
    m.simulate(&p, &times, 0.0, &mut RngStream::new(seed, 0)).unwrap()
}

/// Monte Carlo standard error of a chain mean from its effective sample size.
pub fn mc_se(xs: &[f64]) -> f64 {
    let ess = adamcmc::stats::effective_sample_size(xs).unwrap();
    (adamcmc::stats::variance(xs) / ess).sqrt()
}
