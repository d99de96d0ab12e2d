//! Double-well-potential SDE observed through an Ornstein-Uhlenbeck error.
//!
//! ```text
//! z_t  = x_t + y_t
//! dx_t = -V'(x_t) dt + σ dW
//! dy_t = -κ y_t dt + sqrt(2κγ²) dW'
//! V(x) = ½ |½|x - c|^p₁ - d + g x|^p₂ + ½ A x²
//! ```
//! Sampling coordinates are `θ = [log κ, log γ, log c, log d, log p₁, log p₂, log σ]`;
//! `A` and `g` are held fixed.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::models::TimeSeries;
use crate::rng::RngStream;
use crate::smc::StateSpaceModel;
use crate::types::ParameterPoint;

/// Posterior-mean configuration used for synthetic data generation.
pub const DWP_THETA_TRUE: [f64; 7] = [0.74, 0.52, 3.10, 3.32, 0.45, -0.07, 0.68];
pub const DWP_A: f64 = -0.0025;
pub const DWP_G: f64 = 0.0;
pub const DEFAULT_SUBSTEPS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DwpParams {
    pub kappa: f64,
    pub gamma: f64,
    pub c: f64,
    pub d: f64,
    pub p1: f64,
    pub p2: f64,
    pub sigma: f64,
    pub a: f64,
    pub g: f64,
}

impl DwpParams {
    pub fn from_theta(theta: &ParameterPoint, a: f64, g: f64) -> Result<Self> {
        if theta.dim() != 7 {
            return Err(Error::DimensionMismatch { expected: 7, got: theta.dim() });
        }
        let e = |i: usize| theta[i].exp();
        let p = Self { kappa: e(0), gamma: e(1), c: e(2), d: e(3), p1: e(4), p2: e(5), sigma: e(6), a, g };
        let positive = [p.kappa, p.gamma, p.c, p.d, p.p1, p.p2, p.sigma];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) || !a.is_finite() || !g.is_finite() {
            return Err(Error::InvalidParameter(format!("DWP parameters out of range: {p:?}")));
        }
        Ok(p)
    }

    pub fn theta(&self) -> [f64; 7] {
        [self.kappa, self.gamma, self.c, self.d, self.p1, self.p2, self.sigma].map(f64::ln)
    }
}

pub fn dwp_potential(x: f64, p: &DwpParams) -> f64 {
    let u = 0.5 * (x - p.c).abs().powf(p.p1) - p.d + p.g * x;
    0.5 * u.abs().powf(p.p2) + 0.5 * p.a * x * x
}

/// dV/dx. At the kinks (`x = c` or `u = 0`) the corresponding one-sided
/// factor is taken as 0.
#[inline]
pub fn dwp_potential_grad(x: f64, p: &DwpParams) -> f64 {
    // |s|^(p-1)·sign(s) is written as |s|^p / s to need one exp/ln pair per power
    let s = x - p.c;
    let (inner_pow, inner_grad) = if s == 0.0 {
        (0.0, 0.0)
    } else {
        let q = (p.p1 * s.abs().ln()).exp();
        (q, 0.5 * p.p1 * q / s)
    };
    let u = 0.5 * inner_pow - p.d + p.g * x;
    let outer = if u == 0.0 { 0.0 } else { 0.5 * p.p2 * (p.p2 * u.abs().ln()).exp() / u };
    outer * (inner_grad + p.g) + p.a * x
}

/// One Euler-Maruyama step with noise variance `dt`.
pub fn dwp_em_step(x: f64, p: &DwpParams, dt: f64, rng: &mut RngStream) -> Result<f64> {
    let next = em_step_unchecked(x, p, dt, dt.sqrt(), rng);
    if next.is_finite() {
        Ok(next)
    } else {
        Err(Error::Diverged(0))
    }
}

#[inline]
fn em_step_unchecked(x: f64, p: &DwpParams, dt: f64, sqrt_dt: f64, rng: &mut RngStream) -> f64 {
    let xi: f64 = rng.sample(StandardNormal);
    x - dwp_potential_grad(x, p) * dt + p.sigma * sqrt_dt * xi
}

/// Advances `x` across an interval `dt_total` using `n` equal Euler substeps.
#[inline]
pub fn dwp_advance(x: f64, p: &DwpParams, dt_total: f64, n: usize, rng: &mut RngStream) -> f64 {
    let h = dt_total / n as f64;
    let sqrt_h = h.sqrt();
    let mut x = x;
    for _ in 0..n {
        x = em_step_unchecked(x, p, h, sqrt_h, rng);
    }
    x
}

/// Exact OU transition: `N(y e^{-κΔ}, γ²(1 - e^{-2κΔ}))`.
pub fn ou_transition_sample(y: f64, kappa: f64, gamma: f64, dt: f64, rng: &mut RngStream) -> f64 {
    let decay = (-kappa * dt).exp();
    let sd = gamma * (1.0 - decay * decay).sqrt();
    y * decay + sd * rng.sample::<f64, _>(StandardNormal)
}

/// Simulates `t_len` observations at times `dt, 2dt, …`.
pub fn dwp_simulate(
    p: &DwpParams,
    t_len: usize,
    dt: f64,
    n_substeps: usize,
    x0: f64,
    rng: &mut RngStream,
) -> Result<TimeSeries> {
    if t_len == 0 {
        return Err(Error::EmptyInput("simulation length"));
    }
    if n_substeps == 0 || !(dt > 0.0) {
        return Err(Error::InvalidParameter("need n_substeps >= 1 and dt > 0".into()));
    }
    let times: Vec<f64> = (1..=t_len).map(|t| t as f64 * dt).collect();
    let (_, z) = simulate_paths(p, &times, n_substeps, x0, rng)?;
    TimeSeries::new(times, z, x0)
}

/// Latent path `x` and observations `z` at `times`.
pub fn simulate_paths(
    p: &DwpParams,
    times: &[f64],
    substeps_per_interval: usize,
    x0: f64,
    rng: &mut RngStream,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut xs = Vec::with_capacity(times.len());
    let mut zs = Vec::with_capacity(times.len());
    let mut x = x0;
    let mut y = 0.0;
    let mut prev_t = 0.0;
    for (i, &t) in times.iter().enumerate() {
        let dt = t - prev_t;
        x = dwp_advance(x, p, dt, substeps_per_interval, rng);
        if !x.is_finite() {
            return Err(Error::Diverged(i));
        }
        y = if i == 0 {
            p.gamma * rng.sample::<f64, _>(StandardNormal)
        } else {
            ou_transition_sample(y, p.kappa, p.gamma, dt, rng)
        };
        xs.push(x);
        zs.push(x + y);
        prev_t = t;
    }
    Ok((xs, zs))
}

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[inline]
fn obs_log_weight_unchecked(
    z_t: f64,
    z_prev: f64,
    x_t: f64,
    x_prev: f64,
    p: &DwpParams,
    dt: f64,
    is_first: bool,
) -> f64 {
    let (resid, scale) = if is_first {
        (z_t - x_t, p.gamma)
    } else {
        let decay = (-p.kappa * dt).exp();
        (z_t - x_t - decay * (z_prev - x_prev), p.gamma * (1.0 - decay * decay).sqrt())
    };
    let w = resid / scale;
    -0.5 * w * w - LN_SQRT_2PI - scale.ln()
}

/// Log observation weight for one particle.
pub fn dwp_obs_log_weight(
    z_t: f64,
    z_prev: f64,
    x_t: f64,
    x_prev: f64,
    p: &DwpParams,
    dt: f64,
    is_first: bool,
) -> Result<f64> {
    if !(p.gamma > 0.0) {
        return Err(Error::InvalidParameter(format!("gamma must be > 0, got {}", p.gamma)));
    }
    Ok(obs_log_weight_unchecked(z_t, z_prev, x_t, x_prev, p, dt, is_first))
}

/// State-space adapter; `substeps_per_unit` Euler steps per unit time.
#[derive(Debug, Clone, Copy)]
pub struct DwpModel {
    pub a: f64,
    pub g: f64,
    pub substeps_per_unit: usize,
}

impl Default for DwpModel {
    fn default() -> Self {
        Self { a: DWP_A, g: DWP_G, substeps_per_unit: DEFAULT_SUBSTEPS }
    }
}

impl DwpModel {
    fn substeps(&self, dt: f64) -> usize {
        ((dt * self.substeps_per_unit as f64).round() as usize).max(1)
    }
}

impl StateSpaceModel for DwpModel {
    type Params = DwpParams;

    fn n_params(&self) -> usize {
        7
    }

    fn param_names(&self) -> Vec<String> {
        ["log_kappa", "log_gamma", "log_c", "log_d", "log_p1", "log_p2", "log_sigma"].map(String::from).to_vec()
    }

    fn params(&self, theta: &ParameterPoint) -> Result<DwpParams> {
        DwpParams::from_theta(theta, self.a, self.g)
    }

    fn propagate(&self, p: &DwpParams, x: f64, dt: f64, rng: &mut RngStream) -> f64 {
        dwp_advance(x, p, dt, self.substeps(dt), rng)
    }

    /// Substep-major so that independent particles overlap in the pipeline.
    fn propagate_all(&self, p: &DwpParams, from: &[f64], to: &mut [f64], dt: f64, rng: &mut RngStream) {
        let n = self.substeps(dt);
        let h = dt / n as f64;
        let sqrt_h = h.sqrt();
        to.copy_from_slice(from);
        for _ in 0..n {
            for x in to.iter_mut() {
                *x = em_step_unchecked(*x, p, h, sqrt_h, rng);
            }
        }
    }

    fn log_weight(&self, p: &DwpParams, data: &TimeSeries, t: usize, x: f64, x_prev: f64) -> f64 {
        if !x.is_finite() {
            return f64::NEG_INFINITY;
        }
        let z = data.values();
        let z_prev = if t == 0 { 0.0 } else { z[t - 1] };
        obs_log_weight_unchecked(z[t], z_prev, x, x_prev, p, data.interval(t), t == 0)
    }

    fn simulate(&self, p: &DwpParams, times: &[f64], x0: f64, rng: &mut RngStream) -> Result<TimeSeries> {
        let dt = times.first().copied().unwrap_or(1.0);
        let (_, z) = simulate_paths(p, times, self.substeps(dt), x0, rng)?;
        TimeSeries::new(times.to_vec(), z, x0)
    }
}

/// Standard-normal density, used by the brute-force joint-density check.
pub fn std_normal_pdf(w: f64) -> f64 {
    (-0.5 * w * w).exp() / (2.0 * PI).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(c: f64, d: f64, p1: f64, p2: f64, a: f64, g: f64) -> DwpParams {
        DwpParams { kappa: 1.0, gamma: 1.0, c, d, p1, p2, sigma: 1.0, a, g }
    }

    fn true_params() -> DwpParams {
        let theta = ParameterPoint::new(DWP_THETA_TRUE.to_vec()).unwrap();
        DwpParams::from_theta(&theta, DWP_A, DWP_G).unwrap()
    }

    #[test]
    fn potential_examples() {
        let p = params(0.0, 0.0, 2.0, 2.0, 0.0, 0.0);
        assert!((dwp_potential(2.0, &p) - 2.0).abs() < 1e-14);
        assert!((dwp_potential_grad(2.0, &p) - 4.0).abs() < 1e-14);
        let p = params(3.0, 2.0, 1.5, 0.8, 0.3, 0.0);
        let expected = 0.5 * 2f64.powf(0.8) + 0.5 * 0.3 * 9.0;
        assert!((dwp_potential(3.0, &p) - expected).abs() < 1e-14);
    }

    #[test]
    fn symmetric_gradient_is_odd() {
        let p = params(0.0, 4.0, 1.7, 0.9, 0.0, 0.0);
        for x in [0.3, 1.0, 2.5, 7.0] {
            assert!((dwp_potential_grad(x, &p) + dwp_potential_grad(-x, &p)).abs() < 1e-12);
        }
        assert_eq!(dwp_potential_grad(0.0, &p), 0.0);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = RngStream::new(17, 0);
        let mut checked = 0;
        while checked < 1000 {
            let p = DwpParams {
                kappa: 1.0,
                gamma: 1.0,
                c: rng.random_range(-5.0..5.0),
                d: rng.random_range(0.1..5.0),
                p1: rng.random_range(0.5..3.0),
                p2: rng.random_range(0.5..3.0),
                sigma: 1.0,
                a: rng.random_range(-0.5..0.5),
                g: rng.random_range(-0.5..0.5),
            };
            let x: f64 = rng.random_range(-10.0..10.0);
            let u = 0.5 * (x - p.c).abs().powf(p.p1) - p.d + p.g * x;
            if (x - p.c).abs() < 1e-3 || u.abs() < 1e-3 {
                continue;
            }
            let h = 1e-6;
            let fd = (dwp_potential(x + h, &p) - dwp_potential(x - h, &p)) / (2.0 * h);
            let g = dwp_potential_grad(x, &p);
            let rel = (g - fd).abs() / g.abs().max(1e-2);
            assert!(rel < 1e-4, "x={x} p={p:?} grad={g} fd={fd}");
            checked += 1;
        }
    }

    #[test]
    fn true_potential_has_two_wells() {
        let p = true_params();
        let xs: Vec<f64> = (0..=6000).map(|i| -20.0 + i as f64 * 0.01).collect();
        let v: Vec<f64> = xs.iter().map(|&x| dwp_potential(x, &p)).collect();
        let minima = (1..v.len() - 1).filter(|&i| v[i] < v[i - 1] && v[i] < v[i + 1]).count();
        assert_eq!(minima, 2);
    }

    #[test]
    fn em_step_deterministic_cases() {
        let mut rng = RngStream::new(1, 1);
        let mut flat = params(0.0, 1.0, 2.0, 2.0, 0.0, 0.0);
        flat.sigma = 0.0;
        // x = c: both kink factors vanish
        assert_eq!(dwp_em_step(0.0, &flat, 0.1, &mut rng).unwrap(), 0.0);
        let mut p = params(0.0, 0.0, 2.0, 2.0, 0.0, 0.0);
        p.sigma = 0.0;
        let x = dwp_em_step(2.0, &p, 0.01, &mut rng).unwrap();
        assert!((x - (2.0 - 4.0 * 0.01)).abs() < 1e-14);
    }

    #[test]
    fn euler_error_halves_with_step() {
        // |x| < sqrt(2d) with p₁ = 2, p₂ = 1: V = d/2 + (A - 1/2) x²/2, an OU drift with k = A - 1/2.
        let mut p = params(0.0, 100.0, 2.0, 1.0, 1.5, 0.0);
        p.sigma = 0.0;
        let k = p.a - 0.5;
        let (x0, horizon) = (1.0, 1.0);
        let err = |n: usize| {
            let mut rng = RngStream::new(0, 0);
            let x = dwp_advance(x0, &p, horizon, n, &mut rng);
            (x - x0 * (-k * horizon).exp()).abs()
        };
        let ratio = err(100) / err(200);
        assert!((ratio - 2.0).abs() < 0.05, "ratio {ratio}");
    }

    #[test]
    fn ou_transition_moments() {
        let mut rng = RngStream::new(4, 4);
        let n = 200_000;
        let gamma = 1.3;
        let draws: Vec<f64> = (0..n).map(|_| ou_transition_sample(1.0, 2f64.ln(), gamma, 1.0, &mut rng)).collect();
        let m = crate::stats::mean(&draws);
        let v = crate::stats::variance(&draws);
        let target_v = 0.75 * gamma * gamma;
        assert!((m - 0.5).abs() < 4.0 * (target_v / n as f64).sqrt());
        assert!((v / target_v - 1.0).abs() < 0.02);
        // far horizon: stationary
        let y = ou_transition_sample(5.0, 50.0, gamma, 1.0, &mut rng);
        assert!(y.abs() < 10.0 * gamma);
    }

    #[test]
    fn ou_lag_one_autocorrelation() {
        let kappa: f64 = 0.7;
        let mut rng = RngStream::new(8, 0);
        let n = 1_000_000;
        let mut y = 0.0;
        let ys: Vec<f64> = (0..n)
            .map(|_| {
                y = ou_transition_sample(y, kappa, 1.0, 1.0, &mut rng);
                y
            })
            .collect();
        let m = crate::stats::mean(&ys);
        let c0: f64 = ys.iter().map(|a| (a - m).powi(2)).sum();
        let c1: f64 = ys.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum();
        let rho = c1 / c0;
        assert!((rho / (-kappa).exp() - 1.0).abs() < 0.01, "rho {rho}");
    }

    #[test]
    fn simulate_degenerate_cases() {
        let mut p = true_params();
        p.sigma = 0.0;
        p.gamma = 0.0;
        p.p1 = 2.0;
        p.p2 = 2.0;
        p.d = 1.0;
        // locate a well by descending the potential
        let mut x = 10.0;
        for _ in 0..200_000 {
            x -= 0.01 * dwp_potential_grad(x, &p);
        }
        let mut rng = RngStream::new(0, 0);
        let ts = dwp_simulate(&p, 20, 1.0, 10, x, &mut rng).unwrap();
        assert!(ts.values().iter().all(|z| (z - x).abs() < 1e-6));

        let mut p = true_params();
        p.gamma = 0.0;
        let (xs, zs) = simulate_paths(&p, &[1.0, 2.0, 3.0], 10, p.c, &mut rng).unwrap();
        assert_eq!(xs, zs);
        assert!(dwp_simulate(&p, 0, 1.0, 10, 0.0, &mut rng).is_err());
    }

    #[test]
    fn simulated_marginal_is_bimodal() {
        let p = true_params();
        let mut rng = RngStream::new(2024, 0);
        let ts = dwp_simulate(&p, 100_000, 1.0, DEFAULT_SUBSTEPS, p.c, &mut rng).unwrap();
        assert_eq!(kde_peak_count(ts.values()), 2);
    }

    /// Gaussian KDE on a grid; counts local maxima above 5% of the top peak.
    pub(crate) fn kde_peak_count(xs: &[f64]) -> usize {
        let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sd = crate::stats::variance(xs).sqrt();
        let bw = 1.06 * sd * (xs.len() as f64).powf(-0.2);
        let bins = 400;
        let width = (hi - lo) / bins as f64;
        let mut hist = vec![0.0; bins + 1];
        for &x in xs {
            hist[((x - lo) / width) as usize] += 1.0;
        }
        let grid: Vec<f64> = (0..=bins).map(|i| lo + i as f64 * width).collect();
        let dens: Vec<f64> = grid
            .iter()
            .map(|&g| hist.iter().enumerate().map(|(j, &c)| c * std_normal_pdf((g - grid[j]) / bw)).sum())
            .collect();
        let top = dens.iter().copied().fold(0.0, f64::max);
        (1..dens.len() - 1).filter(|&i| dens[i] > dens[i - 1] && dens[i] >= dens[i + 1] && dens[i] > 0.05 * top).count()
    }

    #[test]
    fn obs_weight_examples() {
        let p = params(0.0, 1.0, 1.0, 1.0, 0.0, 0.0);
        let w = dwp_obs_log_weight(2.0, 0.0, 2.0, 0.0, &p, 1.0, true).unwrap();
        assert!((w + 0.5 * (2.0 * PI).ln()).abs() < 1e-14);
        // κ → ∞: independent N(x_t, γ²)
        let mut fast = p;
        fast.kappa = 1e6;
        let w = dwp_obs_log_weight(1.3, 9.0, 0.4, -3.0, &fast, 1.0, false).unwrap();
        let indep = dwp_obs_log_weight(1.3, 0.0, 0.4, 0.0, &fast, 1.0, true).unwrap();
        assert!((w - indep).abs() < 1e-12);
        let mut bad = p;
        bad.gamma = 0.0;
        assert!(dwp_obs_log_weight(0.0, 0.0, 0.0, 0.0, &bad, 1.0, true).is_err());
    }

    #[test]
    fn path_weights_equal_joint_density() {
        let p = true_params();
        let mut rng = RngStream::new(31, 0);
        let times: Vec<f64> = (1..=10).map(f64::from).collect();
        let (xs, zs) = simulate_paths(&p, &times, 10, p.c, &mut rng).unwrap();
        let data = TimeSeries::new(times.clone(), zs.clone(), p.c).unwrap();
        let model = DwpModel::default();
        let summed: f64 =
            (0..10).map(|t| model.log_weight(&p, &data, t, xs[t], if t == 0 { p.c } else { xs[t - 1] })).sum();
        // direct product of the closed-form joint density
        let mut dens = std_normal_pdf((zs[0] - xs[0]) / p.gamma) / p.gamma;
        for t in 1..10 {
            let e = (-p.kappa).exp();
            let s = p.gamma * (1.0 - e * e).sqrt();
            dens *= std_normal_pdf((zs[t] - xs[t] - e * (zs[t - 1] - xs[t - 1])) / s) / s;
        }
        assert!((summed - dens.ln()).abs() < 1e-10, "{summed} vs {}", dens.ln());
    }
}
