//! Linear-Gaussian toy state-space model with an unknown observation offset.
//!
//! ```text
//! x_t = ρ x_{t-1} + σ_x ε_t
//! y_t = μ + x_t + σ_y η_t
//! ```
//! The single sampling coordinate is `θ = [μ]`.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::models::TimeSeries;
use crate::rng::RngStream;
use crate::smc::StateSpaceModel;
use crate::types::ParameterPoint;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearGaussian {
    pub rho: f64,
    pub sigma_x: f64,
    pub sigma_y: f64,
}

impl Default for LinearGaussian {
    fn default() -> Self {
        Self { rho: 0.8, sigma_x: 1.0, sigma_y: 0.5 }
    }
}

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

impl StateSpaceModel for LinearGaussian {
    type Params = f64;

    fn n_params(&self) -> usize {
        1
    }

    fn param_names(&self) -> Vec<String> {
        vec!["mu".into()]
    }

    fn params(&self, theta: &ParameterPoint) -> Result<f64> {
        if theta.dim() != 1 {
            return Err(Error::DimensionMismatch { expected: 1, got: theta.dim() });
        }
        Ok(theta[0])
    }

    fn propagate(&self, _mu: &f64, x: f64, _dt: f64, rng: &mut RngStream) -> f64 {
        self.rho * x + self.sigma_x * rng.sample::<f64, _>(StandardNormal)
    }

    fn log_weight(&self, mu: &f64, data: &TimeSeries, t: usize, x: f64, _x_prev: f64) -> f64 {
        let w = (data.values()[t] - mu - x) / self.sigma_y;
        -0.5 * w * w - LN_SQRT_2PI - self.sigma_y.ln()
    }

    fn simulate(&self, mu: &f64, times: &[f64], x0: f64, rng: &mut RngStream) -> Result<TimeSeries> {
        let mut x = x0;
        let ys = times
            .iter()
            .map(|_| {
                x = self.propagate(mu, x, 1.0, rng);
                mu + x + self.sigma_y * rng.sample::<f64, _>(StandardNormal)
            })
            .collect();
        TimeSeries::new(times.to_vec(), ys, x0)
    }
}
