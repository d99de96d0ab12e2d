//! Bootstrap particle filter giving unbiased likelihood estimates.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::TimeSeries;
use crate::rng::RngStream;
use crate::samplers::LikelihoodEstimator;
use crate::stats::log_mean_exp;
use crate::types::{LogLikEstimate, LogLikSource, ParameterPoint};

/// A state-space model with a scalar latent state.
pub trait StateSpaceModel: Sync {
    /// Natural-scale parameters unpacked once per filter run.
    type Params: Sync;

    fn n_params(&self) -> usize;

    fn param_names(&self) -> Vec<String>;

    fn params(&self, theta: &ParameterPoint) -> Result<Self::Params>;

    fn validate_data(&self, _data: &TimeSeries) -> Result<()> {
        Ok(())
    }

    /// Draws the latent state `dt` time units after `x`.
    fn propagate(&self, p: &Self::Params, x: f64, dt: f64, rng: &mut RngStream) -> f64;

    /// Propagates every particle of `from` into `to`. The default calls
    /// [`propagate`](Self::propagate) particle by particle.
    fn propagate_all(&self, p: &Self::Params, from: &[f64], to: &mut [f64], dt: f64, rng: &mut RngStream) {
        for (dst, &x) in to.iter_mut().zip(from) {
            *dst = self.propagate(p, x, dt, rng);
        }
    }

    /// Log observation weight of observation `t` given the propagated state
    /// `x` and the (resampled) state `x_prev` it was propagated from.
    fn log_weight(&self, p: &Self::Params, data: &TimeSeries, t: usize, x: f64, x_prev: f64) -> f64;

    /// Forward-simulates observations at `times`.
    fn simulate(&self, p: &Self::Params, times: &[f64], x0: f64, rng: &mut RngStream) -> Result<TimeSeries>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Resampling {
    Multinomial,
    #[default]
    Systematic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PfConfig {
    pub n_particles: usize,
    pub n_replicates: usize,
    #[serde(default)]
    pub resampling: Resampling,
}

impl PfConfig {
    pub fn new(n_particles: usize, n_replicates: usize) -> Result<Self> {
        let cfg = Self { n_particles, n_replicates, resampling: Resampling::Systematic };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_particles == 0 || self.n_replicates == 0 {
            return Err(Error::InvalidParameter("particle filter needs n_particles >= 1 and n_replicates >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSystem {
    pub particles: Vec<f64>,
    pub log_weights: Vec<f64>,
    pub t: usize,
}

/// Ancestor indices drawn proportionally to `exp(log_weights)`.
pub fn resample_indices(log_weights: &[f64], scheme: Resampling, rng: &mut RngStream) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(log_weights.len());
    let mut cdf = Vec::with_capacity(log_weights.len());
    resample_into(log_weights, scheme, rng, &mut cdf, &mut out)?;
    Ok(out)
}

fn resample_into(
    log_weights: &[f64],
    scheme: Resampling,
    rng: &mut RngStream,
    cdf: &mut Vec<f64>,
    out: &mut Vec<usize>,
) -> Result<()> {
    let n = log_weights.len();
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || n == 0 {
        return Err(Error::FilterCollapsed);
    }
    cdf.clear();
    let mut acc = 0.0;
    for &lw in log_weights {
        acc += (lw - max).exp();
        cdf.push(acc);
    }
    let total = acc;
    out.clear();
    match scheme {
        Resampling::Systematic => {
            let step = total / n as f64;
            let mut pos = rng.random::<f64>() * step;
            let mut j = 0;
            for _ in 0..n {
                while j < n - 1 && cdf[j] <= pos {
                    j += 1;
                }
                out.push(j);
                pos += step;
            }
        }
        Resampling::Multinomial => {
            for _ in 0..n {
                let u = rng.random::<f64>() * total;
                let j = cdf.partition_point(|&c| c <= u).min(n - 1);
                out.push(j);
            }
        }
    }
    Ok(())
}

/// Resamples a particle system; output weights are uniform.
pub fn resample(system: &ParticleSystem, scheme: Resampling, rng: &mut RngStream) -> Result<ParticleSystem> {
    let idx = resample_indices(&system.log_weights, scheme, rng)?;
    Ok(ParticleSystem {
        particles: idx.iter().map(|&i| system.particles[i]).collect(),
        log_weights: vec![0.0; idx.len()],
        t: system.t,
    })
}

/// Result of one filter pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterRun {
    pub log_likelihood: LogLikEstimate,
    /// Observation index at which every weight vanished.
    pub collapsed_at: Option<usize>,
}

impl FilterRun {
    fn collapsed(t: usize) -> Self {
        Self {
            log_likelihood: LogLikEstimate { value: f64::NEG_INFINITY, source: LogLikSource::ParticleFilter },
            collapsed_at: Some(t),
        }
    }
}

/// Bootstrap filter: propagate, weight, resample at every observation.
///
/// Returns `log p̂(z|θ) = Σ_t log((1/N) Σ_n w_t^n)`, an unbiased estimate of
/// the likelihood on the linear scale.
pub fn bootstrap_loglik<M: StateSpaceModel>(
    model: &M,
    theta: &ParameterPoint,
    data: &TimeSeries,
    cfg: &PfConfig,
    rng: &mut RngStream,
) -> Result<FilterRun> {
    cfg.validate()?;
    let p = match model.params(theta) {
        Ok(p) => p,
        Err(Error::InvalidParameter(_)) => return Ok(FilterRun::collapsed(0)),
        Err(e) => return Err(e),
    };
    let n = cfg.n_particles;
    let mut resampled = vec![data.x0(); n];
    let mut propagated = vec![0.0; n];
    let mut log_w = vec![0.0; n];
    let mut cdf = Vec::with_capacity(n);
    let mut ancestors = Vec::with_capacity(n);
    let mut total = 0.0;
    let last = data.len() - 1;
    for t in 0..data.len() {
        let dt = data.interval(t);
        model.propagate_all(&p, &resampled, &mut propagated, dt, rng);
        for i in 0..n {
            let lw = model.log_weight(&p, data, t, propagated[i], resampled[i]);
            log_w[i] = if lw.is_nan() { f64::NEG_INFINITY } else { lw };
        }
        let inc = log_mean_exp(&log_w)?;
        if inc == f64::NEG_INFINITY {
            return Ok(FilterRun::collapsed(t));
        }
        total += inc;
        if t < last {
            resample_into(&log_w, cfg.resampling, rng, &mut cdf, &mut ancestors)?;
            for (dst, &a) in resampled.iter_mut().zip(&ancestors) {
                *dst = propagated[a];
            }
        }
    }
    Ok(FilterRun {
        log_likelihood: LogLikEstimate { value: total, source: LogLikSource::ParticleFilter },
        collapsed_at: None,
    })
}

/// Averages `n_replicates` independent filter estimates on the linear scale.
///
/// Replicate 0 uses `rng` itself, replicate `k` uses `rng.substream(k)`; the
/// replicates run on the rayon pool and are combined in index order.
pub fn averaged_loglik<M: StateSpaceModel>(
    model: &M,
    theta: &ParameterPoint,
    data: &TimeSeries,
    cfg: &PfConfig,
    rng: &RngStream,
) -> Result<LogLikEstimate> {
    cfg.validate()?;
    let runs: Vec<f64> = (0..cfg.n_replicates as u64)
        .into_par_iter()
        .map(|k| {
            let mut stream = if k == 0 { rng.clone() } else { rng.substream(k) };
            bootstrap_loglik(model, theta, data, cfg, &mut stream).map(|r| r.log_likelihood.value)
        })
        .collect::<Result<_>>()?;
    Ok(LogLikEstimate { value: log_mean_exp(&runs)?, source: LogLikSource::ParticleFilter })
}

/// Particle-filter likelihood for a model and a fixed data set.
#[derive(Debug, Clone)]
pub struct ParticleLikelihood<M> {
    pub model: M,
    pub data: TimeSeries,
    pub cfg: PfConfig,
}

impl<M: StateSpaceModel> ParticleLikelihood<M> {
    pub fn new(model: M, data: TimeSeries, cfg: PfConfig) -> Result<Self> {
        cfg.validate()?;
        model.validate_data(&data)?;
        Ok(Self { model, data, cfg })
    }
}

impl<M: StateSpaceModel> LikelihoodEstimator for ParticleLikelihood<M> {
    fn dim(&self) -> usize {
        self.model.n_params()
    }

    fn log_likelihood(&self, theta: &ParameterPoint, rng: &RngStream) -> Result<LogLikEstimate> {
        averaged_loglik(&self.model, theta, &self.data, &self.cfg, rng)
    }
}
