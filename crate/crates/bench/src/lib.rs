//! Fixtures shared by the benchmarks.

use adamcmc::models::dwp::DWP_THETA_TRUE;
use adamcmc::models::ricker::{RICKER_THETA_TRUE, RICKER_X0};
use adamcmc::models::{DwpModel, RickerModel};
use adamcmc::{ParameterPoint, ParticleLikelihood, PfConfig, RngStream, StateSpaceModel};

fn fixture<M: StateSpaceModel>(
    model: M,
    theta: &[f64],
    t_len: usize,
    x0: f64,
    cfg: PfConfig,
) -> (ParticleLikelihood<M>, ParameterPoint) {
    let theta = ParameterPoint::new(theta.to_vec()).expect("point");
    let params = model.params(&theta).expect("params");
    let times: Vec<f64> = (1..=t_len).map(|t| t as f64).collect();
    let data = model.simulate(&params, &times, x0, &mut RngStream::new(1, 0)).expect("simulate");
    (ParticleLikelihood::new(model, data, cfg).expect("likelihood"), theta)
}

pub fn ricker_likelihood(n_particles: usize) -> (ParticleLikelihood<RickerModel>, ParameterPoint) {
    fixture(RickerModel, &RICKER_THETA_TRUE, 50, RICKER_X0, PfConfig::new(n_particles, 1).expect("config"))
}

pub fn dwp_likelihood(
    t_len: usize,
    n_particles: usize,
    replicates: usize,
) -> (ParticleLikelihood<DwpModel>, ParameterPoint) {
    let x0 = DWP_THETA_TRUE[2].exp();
    let cfg = PfConfig::new(n_particles, replicates).expect("config");
    fixture(DwpModel::default(), &DWP_THETA_TRUE, t_len, x0, cfg)
}
