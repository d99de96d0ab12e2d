//! Random-walk Metropolis samplers: PMCMC, MCWM, delayed acceptance and its
//! accelerated variant.

mod adapt;
mod da;
mod kernel;
mod mh;

pub use adapt::{AmConfig, AmState};
pub use da::{ada_second_stage, run_ada, run_da, DaConfig, DaKernels, SecondStage};
pub use kernel::ProposalKernel;
pub use mh::{run_mcwm, run_pmcmc, McmcConfig, McmcOutput};

use crate::error::Result;
use crate::rng::RngStream;
use crate::surrogate::Surrogate;
use crate::types::{LogLikEstimate, ParameterPoint};

/// Something that returns a (possibly noisy) log-likelihood for `θ`.
///
/// Implementations must be deterministic given the stream.
pub trait LikelihoodEstimator: Sync {
    fn dim(&self) -> usize;

    fn log_likelihood(&self, theta: &ParameterPoint, rng: &RngStream) -> Result<LogLikEstimate>;
}

/// Closed-form log-density used both as exact likelihood and as a zero-variance surrogate.
pub struct AnalyticTarget<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> AnalyticTarget<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> LikelihoodEstimator for AnalyticTarget<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn log_likelihood(&self, theta: &ParameterPoint, _rng: &RngStream) -> Result<LogLikEstimate> {
        LogLikEstimate::exact((self.f)(theta.as_slice()))
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> Surrogate for AnalyticTarget<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn draw(&self, theta: &ParameterPoint, _rng: &mut RngStream) -> Result<f64> {
        Ok((self.f)(theta.as_slice()))
    }
}

/// `num − den` with `-inf` handled: an impossible numerator always loses, an
/// impossible denominator always wins.
pub(crate) fn log_ratio(num: f64, den: f64) -> f64 {
    if num == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else if den == f64::NEG_INFINITY {
        f64::INFINITY
    } else {
        num - den
    }
}
