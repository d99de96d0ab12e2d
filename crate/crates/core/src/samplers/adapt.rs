use nalgebra::{DMatrix, DVector};

use super::ProposalKernel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct AmConfig {
    /// Target acceptance rate in `(0, 1)`.
    pub target: f64,
    /// Samples collected before the empirical covariance replaces the initial one.
    pub adapt_start: usize,
    /// Robbins-Monro step `γ_r = r^-exponent`.
    pub exponent: f64,
}

impl Default for AmConfig {
    fn default() -> Self {
        Self { target: 0.234, adapt_start: 200, exponent: 0.6 }
    }
}

/// Adaptive Metropolis state: running covariance and a global log-scale pushed
/// towards a target acceptance rate.
#[derive(Debug, Clone)]
pub struct AmState {
    cfg: AmConfig,
    initial: DMatrix<f64>,
    mean: DVector<f64>,
    m2: DMatrix<f64>,
    n: usize,
    log_scale: f64,
    iteration: usize,
    frozen: bool,
}

impl AmState {
    pub fn new(initial: &ProposalKernel, cfg: AmConfig) -> Result<Self> {
        if !(cfg.target > 0.0 && cfg.target < 1.0) {
            return Err(Error::InvalidParameter(format!("target acceptance {} not in (0,1)", cfg.target)));
        }
        let d = initial.dim();
        Ok(Self {
            cfg,
            initial: initial.effective_covariance(),
            mean: DVector::zeros(d),
            m2: DMatrix::zeros(d, d),
            n: 0,
            log_scale: 0.0,
            iteration: 0,
            frozen: false,
        })
    }

    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    /// Records the outcome of one iteration and the chain's current sample.
    pub fn am_adapt(&mut self, accepted: bool, sample: &[f64]) {
        if self.frozen {
            return;
        }
        self.iteration += 1;
        let gamma = (self.iteration as f64).powf(-self.cfg.exponent);
        let hit = if accepted { 1.0 } else { 0.0 };
        self.log_scale += gamma * (hit - self.cfg.target);

        self.n += 1;
        let x = DVector::from_column_slice(sample);
        let delta = &x - &self.mean;
        self.mean += &delta / self.n as f64;
        let delta2 = &x - &self.mean;
        self.m2 += &delta * delta2.transpose();
    }

    pub fn empirical_covariance(&self) -> Option<DMatrix<f64>> {
        (self.n >= 2).then(|| &self.m2 / (self.n - 1) as f64)
    }

    /// Current proposal kernel.
    pub fn kernel(&self) -> Result<ProposalKernel> {
        let d = self.initial.nrows();
        let factor = (2.0 * self.log_scale).exp();
        if self.n >= self.cfg.adapt_start.max(2) {
            let mut c = self.empirical_covariance().expect("n >= 2") * (2.38 * 2.38 / d as f64);
            c = (&c + c.transpose()) * 0.5;
            let eps = 1e-10 * (0..d).map(|i| c[(i, i)]).fold(0.0, f64::max).max(1e-300);
            for i in 0..d {
                c[(i, i)] += eps;
            }
            if let Ok(k) = ProposalKernel::new(c * factor, 1.0) {
                return Ok(k);
            }
        }
        ProposalKernel::new(&self.initial * factor, 1.0)
    }
}
