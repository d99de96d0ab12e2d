use adamcmc::caseselect::{fit_biased_coin, CaseLabel, LabeledCases};
use adamcmc::samplers::ada_second_stage;
use adamcmc::smc::{resample_indices, Resampling};
use adamcmc::surrogate::GpModel;
use adamcmc::{CaseSelector, ParameterPoint, RngStream, TrainingDataset};
use proptest::prelude::*;

fn dataset(xs: &[f64], f: impl Fn(f64) -> f64) -> TrainingDataset {
    let pts = xs.iter().map(|x| ParameterPoint::new(vec![*x]).unwrap()).collect();
    TrainingDataset::new(pts, xs.iter().map(|x| f(*x)).collect(), None).unwrap()
}

fn spread(n: usize, jitter: &[f64]) -> Vec<f64> {
    (0..n).map(|i| -2.0 + 4.0 * i as f64 / (n - 1) as f64 + 0.05 * jitter[i % jitter.len()]).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn consistent_case_reproduces_plain_decision(
        u in 1e-12f64..1.0,
        g in -20.0f64..20.0,
        p in -20.0f64..20.0,
    ) {
        // g: surrogate log-ratio of θ* over θ_prev; p: the estimator's
        let case = CaseLabel::from_orderings(g > 0.0, p > 0.0);
        let plain = u.ln() < (p - g).min(0.0);
        let fast = ada_second_stage(case, u, -g, || Ok(p)).unwrap();
        prop_assert_eq!(fast.accepted, plain);
    }

    #[test]
    fn gp_mean_ignores_row_order(
        jitter in prop::collection::vec(-1.0f64..1.0, 12),
        rot in 1usize..11,
        q in -3.0f64..3.0,
    ) {
        let xs = spread(12, &jitter);
        let f = |x: f64| (2.0 * x).sin() - 0.3 * x * x;
        let mut shuffled = xs.clone();
        shuffled.rotate_left(rot);
        shuffled.swap(0, 5);
        let a = GpModel::with_hyperparams(&dataset(&xs, f), 0.8, &[0.6], 0.01).unwrap();
        let b = GpModel::with_hyperparams(&dataset(&shuffled, f), 0.8, &[0.6], 0.01).unwrap();
        let (pa, pb) = (a.predict(&[q]).unwrap(), b.predict(&[q]).unwrap());
        prop_assert!((pa.mean - pb.mean).abs() < 1e-8 * (1.0 + pa.mean.abs()));
        prop_assert!(pa.variance >= 0.0 && (pa.variance - pb.variance).abs() < 1e-8);
    }

    #[test]
    fn added_point_pins_the_mean(
        jitter in prop::collection::vec(-1.0f64..1.0, 8),
        q in -1.9f64..1.9,
        target in -5.0f64..5.0,
    ) {
        let mut xs = spread(8, &jitter);
        prop_assume!(xs.iter().all(|x| (x - q).abs() > 0.1));
        let f = |x: f64| x.cos();
        let mut ys: Vec<f64> = xs.iter().map(|x| f(*x)).collect();
        xs.push(q);
        ys.push(target);
        let pts = xs.iter().map(|x| ParameterPoint::new(vec![*x]).unwrap()).collect();
        let data = TrainingDataset::new(pts, ys, None).unwrap();
        let gp = GpModel::with_hyperparams(&data, 1.0, &[0.3], 0.0).unwrap();
        let p = gp.predict(&[q]).unwrap();
        prop_assert!((p.mean - target).abs() < 1e-6, "{} vs {}", p.mean, target);
        prop_assert!(p.variance < 1e-6);
    }

    #[test]
    fn systematic_counts_are_floor_or_ceil(
        w in prop::collection::vec(1e-3f64..1.0, 2..30),
        seed in 0u64..1000,
    ) {
        let total: f64 = w.iter().sum();
        let lw: Vec<f64> = w.iter().map(|v| v.ln()).collect();
        let idx = resample_indices(&lw, Resampling::Systematic, &mut RngStream::new(seed, 0)).unwrap();
        prop_assert_eq!(idx.len(), w.len());
        for (i, wi) in w.iter().enumerate() {
            let count = idx.iter().filter(|&&j| j == i).count() as f64;
            let expected = w.len() as f64 * wi / total;
            prop_assert!(count >= expected.floor() - 1e-9 && count <= expected.ceil() + 1e-9);
        }
    }

    #[test]
    fn coin_estimates_are_group_frequencies(labels in prop::collection::vec(0u8..4, 2..200)) {
        let mut cases = LabeledCases::default();
        for l in &labels {
            cases.push(&[0.0], 0.0, CaseLabel::ALL[*l as usize]);
        }
        let n = |k: u8| labels.iter().filter(|&&l| l == k).count() as f64;
        let fitted = fit_biased_coin(&cases);
        if n(0) + n(2) == 0.0 || n(1) + n(3) == 0.0 {
            prop_assert!(fitted.is_err());
        } else {
            match fitted.unwrap() {
                CaseSelector::Coin { p1, p2 } => {
                    prop_assert_eq!(p1, n(0) / (n(0) + n(2)));
                    prop_assert_eq!(p2, n(1) / (n(1) + n(3)));
                }
                other => prop_assert!(false, "unexpected selector {:?}", other.kind()),
            }
        }
    }
}
