use std::hint::black_box;

use adamcmc::caseselect::{CaseLabel, CaseSelect, SelectionContext};
use adamcmc::samplers::{run_ada, run_da, AnalyticTarget};
use adamcmc::surrogate::{fit_gp, GpFitOptions};
use adamcmc::{
    DaConfig, DaKernels, LikelihoodEstimator, ParameterPoint, Prior, ProposalKernel, RngStream, StreamFamily,
    TrainingDataset,
};
use adamcmc_bench::{dwp_likelihood, ricker_likelihood};
use criterion::{criterion_group, criterion_main, Criterion};
use rand::Rng;

fn particle_filters(c: &mut Criterion) {
    let (ricker, theta) = ricker_likelihood(1000);
    c.bench_function("pf_ricker_t50_n1000", |b| {
        let mut k = 0;
        b.iter(|| {
            k += 1;
            black_box(ricker.log_likelihood(&theta, &RngStream::new(7, k)).unwrap())
        })
    });
    let (dwp, theta) = dwp_likelihood(200, 250, 4);
    let mut group = c.benchmark_group("dwp");
    group.sample_size(20);
    group.bench_function("pf_dwp_t200_n250x4", |b| {
        let mut k = 0;
        b.iter(|| {
            k += 1;
            black_box(dwp.log_likelihood(&theta, &RngStream::new(8, k)).unwrap())
        })
    });
    group.finish();
}

fn gp_predict(c: &mut Criterion) {
    let mut rng = RngStream::new(3, 0);
    let mut pts = Vec::new();
    let mut ys = Vec::new();
    for _ in 0..500 {
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        ys.push(-x.iter().map(|v| v * v).sum::<f64>() + 0.3 * rng.random::<f64>());
        pts.push(ParameterPoint::new(x).unwrap());
    }
    let data = TrainingDataset::new(pts, ys, None).unwrap();
    let gp = fit_gp(&data, &GpFitOptions::default()).unwrap();
    c.bench_function("gp_predict_n500_d3", |b| b.iter(|| black_box(gp.predict(black_box(&[0.1, -0.2, 0.3])).unwrap())));
}

fn toy(x: &[f64]) -> f64 {
    -0.5 * x[0] * x[0]
}

struct Truth;

impl CaseSelect for Truth {
    fn select(&self, ctx: &SelectionContext<'_>, _rng: &mut RngStream) -> CaseLabel {
        CaseLabel::from_orderings(ctx.gp_star_higher, toy(ctx.theta_star.as_slice()) > toy(ctx.theta_prev.as_slice()))
    }
}

fn da_steps(c: &mut Criterion) {
    let est = AnalyticTarget::new(1, toy);
    let kernels = DaKernels::from_base(&ProposalKernel::isotropic(1, 1.0).unwrap(), 1.25).unwrap();
    let cfg = DaConfig { iterations: 1000, burnin: 0, beta_mh: 0.15, refresh_second_stage: true };
    let prior = Prior::flat(1);
    let start = ParameterPoint::new(vec![0.0]).unwrap();
    let family = StreamFamily::new(1);
    c.bench_function("da_1000_steps_exact", |b| {
        b.iter(|| black_box(run_da(&est, &est, &prior, &start, &kernels, &cfg, &family).unwrap()))
    });
    c.bench_function("ada_1000_steps_exact", |b| {
        b.iter(|| black_box(run_ada(&est, &est, &Truth, &prior, &start, &kernels, &cfg, &family).unwrap()))
    });
}

criterion_group!(benches, particle_filters, gp_predict, da_steps);
criterion_main!(benches);
