//! Gaussian-process surrogate of the log-likelihood.

mod gp;
mod optim;

pub use gp::{fit_gp, gp_predict, gp_sample_loglik, GpFitOptions, GpHyperparams, GpModel, GpModelSpec, Prediction};
pub use optim::NelderMead;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::types::ParameterPoint;

/// A randomised stand-in for the log-likelihood.
pub trait Surrogate: Sync {
    fn dim(&self) -> usize;

    fn draw(&self, theta: &ParameterPoint, rng: &mut RngStream) -> Result<f64>;
}

impl Surrogate for GpModel {
    fn dim(&self) -> usize {
        GpModel::dim(self)
    }

    fn draw(&self, theta: &ParameterPoint, rng: &mut RngStream) -> Result<f64> {
        gp_sample_loglik(self, theta, rng)
    }
}

/// `[1, θ₁…θ_d, θ₁²…θ_d², θᵢθⱼ (i<j)]`, length `1 + 2d + d(d−1)/2`.
pub fn build_features(theta: &[f64]) -> Vec<f64> {
    let d = theta.len();
    let mut f = Vec::with_capacity(feature_len(d));
    f.push(1.0);
    f.extend_from_slice(theta);
    f.extend(theta.iter().map(|x| x * x));
    for i in 0..d {
        for j in i + 1..d {
            f.push(theta[i] * theta[j]);
        }
    }
    f
}

pub fn feature_len(d: usize) -> usize {
    1 + 2 * d + d * (d.saturating_sub(1)) / 2
}

/// Current states aligned row-by-row with the proposals of a harvest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainAligned {
    pub states: Vec<ParameterPoint>,
    pub logliks: Vec<f64>,
}

/// Harvested `(θ*, ℓ_u(θ*))` pairs plus the optional chain-aligned set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingDataset {
    pub proposals: Vec<ParameterPoint>,
    pub logliks: Vec<f64>,
    pub chain_aligned: Option<ChainAligned>,
}

impl TrainingDataset {
    pub fn new(proposals: Vec<ParameterPoint>, logliks: Vec<f64>, chain_aligned: Option<ChainAligned>) -> Result<Self> {
        if proposals.len() != logliks.len() {
            return Err(Error::DimensionMismatch { expected: proposals.len(), got: logliks.len() });
        }
        if let Some(d) = proposals.first().map(ParameterPoint::dim) {
            if let Some(bad) = proposals.iter().find(|p| p.dim() != d) {
                return Err(Error::DimensionMismatch { expected: d, got: bad.dim() });
            }
        }
        if logliks.iter().any(|v| v.is_nan()) {
            return Err(Error::InvalidParameter("NaN log-likelihood in training data".into()));
        }
        if let Some(ca) = &chain_aligned {
            if ca.states.len() != proposals.len() || ca.logliks.len() != proposals.len() {
                return Err(Error::DimensionMismatch { expected: proposals.len(), got: ca.states.len() });
            }
        }
        Ok(Self { proposals, logliks, chain_aligned })
    }

    pub fn len(&self) -> usize {
        self.proposals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.proposals.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.proposals.first().map_or(0, ParameterPoint::dim)
    }

    /// Keeps only rows where `keep` is true, in order.
    pub fn filter_rows(&self, keep: &[bool]) -> Self {
        let pick = |v: &[f64]| v.iter().zip(keep).filter(|(_, k)| **k).map(|(x, _)| *x).collect::<Vec<_>>();
        let pick_p =
            |v: &[ParameterPoint]| v.iter().zip(keep).filter(|(_, k)| **k).map(|(x, _)| x.clone()).collect::<Vec<_>>();
        Self {
            proposals: pick_p(&self.proposals),
            logliks: pick(&self.logliks),
            chain_aligned: self
                .chain_aligned
                .as_ref()
                .map(|ca| ChainAligned { states: pick_p(&ca.states), logliks: pick(&ca.logliks) }),
        }
    }

    /// Drops rows whose proposal log-likelihood is not finite.
    pub fn finite_only(&self) -> Self {
        let keep: Vec<bool> = self.logliks.iter().map(|v| v.is_finite()).collect();
        self.filter_rows(&keep)
    }
}

/// Removes the `⌊fraction·n⌋` rows with the lowest log-likelihoods.
pub fn trim_training_data(data: &TrainingDataset, fraction: f64) -> Result<TrainingDataset> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::InvalidParameter(format!("trim fraction must be in [0,1), got {fraction}")));
    }
    let n = data.len();
    let drop = (fraction * n as f64).floor() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| data.logliks[a].total_cmp(&data.logliks[b]).then(a.cmp(&b)));
    let mut keep = vec![true; n];
    for &i in &order[..drop] {
        keep[i] = false;
    }
    Ok(data.filter_rows(&keep))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(rows: &[&[f64]]) -> Vec<ParameterPoint> {
        rows.iter().map(|r| ParameterPoint::new(r.to_vec()).unwrap()).collect()
    }

    #[test]
    fn feature_examples() {
        assert_eq!(build_features(&[2.0]), vec![1.0, 2.0, 4.0]);
        assert_eq!(build_features(&[1.0, 3.0]), vec![1.0, 1.0, 3.0, 1.0, 9.0, 3.0]);
        assert_eq!(build_features(&[1.0, 2.0, 3.0]).len(), 10);
        assert_eq!(feature_len(7), 36);
    }

    #[test]
    fn trim_examples() {
        let d =
            TrainingDataset::new(pts(&[&[0.0], &[1.0], &[2.0], &[3.0]]), vec![-10.0, -1.0, -5.0, -2.0], None).unwrap();
        assert_eq!(trim_training_data(&d, 0.0).unwrap(), d);
        let t = trim_training_data(&d, 0.25).unwrap();
        assert_eq!(t.logliks, vec![-1.0, -5.0, -2.0]);
        assert_eq!(t.proposals, pts(&[&[1.0], &[2.0], &[3.0]]));
        assert!(trim_training_data(&d, 1.0).is_err());

        let big = TrainingDataset::new(
            (0..2000).map(|i| ParameterPoint::new(vec![i as f64]).unwrap()).collect(),
            (0..2000).map(|i| ((i * 7919) % 2000) as f64).collect(),
            None,
        )
        .unwrap();
        assert_eq!(trim_training_data(&big, 0.10).unwrap().len(), 1800);
    }

    #[test]
    fn trim_keeps_chain_alignment() {
        let ca = ChainAligned { states: pts(&[&[9.0], &[8.0], &[7.0]]), logliks: vec![0.1, 0.2, 0.3] };
        let d = TrainingDataset::new(pts(&[&[0.0], &[1.0], &[2.0]]), vec![-1.0, -9.0, -2.0], Some(ca)).unwrap();
        let t = trim_training_data(&d, 0.34).unwrap();
        let ca = t.chain_aligned.unwrap();
        assert_eq!(ca.states, pts(&[&[9.0], &[7.0]]));
        assert_eq!(ca.logliks, vec![0.1, 0.3]);
    }

    #[test]
    fn dataset_invariants() {
        assert!(TrainingDataset::new(pts(&[&[0.0]]), vec![], None).is_err());
        assert!(TrainingDataset::new(pts(&[&[0.0]]), vec![f64::NAN], None).is_err());
        assert!(TrainingDataset::new(pts(&[&[0.0], &[1.0, 2.0]]), vec![0.0, 0.0], None).is_err());
    }
}
