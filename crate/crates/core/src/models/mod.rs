//! Forward simulators, transition kernels, observation densities and priors.

pub mod dwp;
pub mod linear_gaussian;
pub mod prior;
pub mod ricker;
mod series;

pub use dwp::{
    dwp_em_step, dwp_obs_log_weight, dwp_potential, dwp_potential_grad, dwp_simulate, ou_transition_sample, DwpModel,
    DwpParams,
};
pub use linear_gaussian::LinearGaussian;
pub use prior::{Prior, PriorComponent};
pub use ricker::{ricker_obs_logpdf, ricker_propagate, ricker_simulate, RickerModel, RickerParams};
pub use series::{ReadSeriesError, TimeSeries};

/// Ricker priors: `log r ~ U(0,10)`, `log φ ~ U(0,4)`, `log σ ~ U(-10,1)`.
pub fn ricker_prior() -> Prior {
    Prior::new(vec![
        PriorComponent::Uniform { low: 0.0, high: 10.0 },
        PriorComponent::Uniform { low: 0.0, high: 4.0 },
        PriorComponent::Uniform { low: -10.0, high: 1.0 },
    ])
    .expect("static prior")
}

/// Deliberately far from the truth. `log σ` sits just inside its prior's upper
/// bound so that the starting point has positive prior density.
pub const RICKER_START: [f64; 3] = [1.10, 1.10, 0.90];

/// Weakly informative Gaussian priors on the seven DWP coordinates.
pub fn dwp_prior() -> Prior {
    let n = |mean, sd| PriorComponent::Normal { mean, sd };
    Prior::new(vec![n(-0.7, 0.8), n(-0.7, 0.8), n(3.34, 0.173), n(2.3, 0.4), n(0.0, 0.5), n(0.0, 0.5), n(0.69, 0.5)])
        .expect("static prior")
}

/// `exp(θ₀) = [0.5, 2, 20, 15, 1.5, 1.5, 2.5]`.
pub fn dwp_start() -> [f64; 7] {
    [0.5f64, 2.0, 20.0, 15.0, 1.5, 1.5, 2.5].map(f64::ln)
}
