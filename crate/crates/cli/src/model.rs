//! Dispatch from the configured model kind to the concrete state-space model.

use adamcmc::models::{DwpModel, LinearGaussian, Prior, RickerModel};
use adamcmc::{
    LikelihoodEstimator, ParameterPoint, ParticleLikelihood, PfConfig, RngStream, StateSpaceModel, TimeSeries,
};
use anyhow::Result;

use crate::config::{ModelKind, PipelineConfig};

#[derive(Debug, Clone, Copy)]
pub enum AnyModel {
    Ricker(RickerModel),
    Dwp(DwpModel),
    Toy(LinearGaussian),
}

macro_rules! dispatch {
    ($self:expr, $m:ident => $body:expr) => {
        match $self {
            AnyModel::Ricker($m) => $body,
            AnyModel::Dwp($m) => $body,
            AnyModel::Toy($m) => $body,
        }
    };
}

fn simulate_with<M: StateSpaceModel>(
    m: &M,
    theta: &ParameterPoint,
    times: &[f64],
    x0: f64,
    rng: &mut RngStream,
) -> Result<TimeSeries> {
    let p = m.params(theta)?;
    Ok(m.simulate(&p, times, x0, rng)?)
}

fn boxed<M: StateSpaceModel + 'static>(m: M, data: TimeSeries, cfg: PfConfig) -> Result<Box<dyn LikelihoodEstimator>> {
    Ok(Box::new(ParticleLikelihood::new(m, data, cfg)?))
}

impl AnyModel {
    pub fn from_config(cfg: &PipelineConfig) -> Self {
        match cfg.model {
            ModelKind::Ricker => AnyModel::Ricker(RickerModel),
            ModelKind::DwpSde => {
                AnyModel::Dwp(DwpModel { a: cfg.dwp.a, g: cfg.dwp.g, substeps_per_unit: cfg.dwp.substeps })
            }
            ModelKind::Toy => AnyModel::Toy(LinearGaussian::default()),
        }
    }

    pub fn param_names(&self) -> Vec<String> {
        dispatch!(self, m => m.param_names())
    }

    pub fn validate_data(&self, data: &TimeSeries) -> Result<()> {
        Ok(dispatch!(self, m => m.validate_data(data))?)
    }

    pub fn simulate(&self, theta: &ParameterPoint, times: &[f64], x0: f64, rng: &mut RngStream) -> Result<TimeSeries> {
        dispatch!(self, m => simulate_with(m, theta, times, x0, rng))
    }

    pub fn estimator(&self, data: TimeSeries, cfg: PfConfig) -> Result<Box<dyn LikelihoodEstimator>> {
        dispatch!(*self, m => boxed(m, data, cfg))
    }
}

pub fn pf_config(cfg: &PipelineConfig) -> Result<PfConfig> {
    let pf = PfConfig { n_particles: cfg.pf.particles, n_replicates: cfg.pf.replicates, resampling: cfg.pf.resampling };
    pf.validate()?;
    Ok(pf)
}

pub fn prior(cfg: &PipelineConfig) -> Result<Prior> {
    Ok(Prior::new(cfg.prior.clone())?)
}

/// Observation times `1..=t_len`.
pub fn unit_times(t_len: usize) -> Vec<f64> {
    (1..=t_len).map(|t| t as f64).collect()
}
