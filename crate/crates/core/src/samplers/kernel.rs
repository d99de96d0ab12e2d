use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::types::ParameterPoint;

/// Gaussian random-walk kernel with covariance `scale² · Σ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelRepr", into = "KernelRepr")]
pub struct ProposalKernel {
    covariance: DMatrix<f64>,
    scale: f64,
    chol: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
struct KernelRepr {
    covariance: Vec<Vec<f64>>,
    scale: f64,
}

impl TryFrom<KernelRepr> for ProposalKernel {
    type Error = Error;

    fn try_from(r: KernelRepr) -> Result<Self> {
        let d = r.covariance.len();
        if r.covariance.iter().any(|row| row.len() != d) {
            return Err(Error::InvalidParameter("covariance must be square".into()));
        }
        Self::new(DMatrix::from_fn(d, d, |i, j| r.covariance[i][j]), r.scale)
    }
}

impl From<ProposalKernel> for KernelRepr {
    fn from(k: ProposalKernel) -> Self {
        let d = k.dim();
        KernelRepr {
            covariance: (0..d).map(|i| (0..d).map(|j| k.covariance[(i, j)]).collect()).collect(),
            scale: k.scale,
        }
    }
}

impl ProposalKernel {
    pub fn new(covariance: DMatrix<f64>, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidParameter(format!("kernel scale must be positive, got {scale}")));
        }
        if covariance.nrows() == 0 || covariance.nrows() != covariance.ncols() {
            return Err(Error::InvalidParameter("covariance must be square and non-empty".into()));
        }
        let asym = (&covariance - covariance.transpose()).amax();
        if asym > 1e-10 * covariance.amax().max(1.0) {
            return Err(Error::InvalidParameter("covariance is not symmetric".into()));
        }
        let sym = (&covariance + covariance.transpose()) * 0.5;
        let chol = sym.clone().cholesky().ok_or(Error::NotPositiveDefinite(0.0))?.unpack();
        Ok(Self { covariance: sym, scale, chol })
    }

    pub fn isotropic(dim: usize, sd: f64) -> Result<Self> {
        Self::new(DMatrix::identity(dim, dim), sd)
    }

    pub fn dim(&self) -> usize {
        self.covariance.nrows()
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// `scale² · Σ`.
    pub fn effective_covariance(&self) -> DMatrix<f64> {
        &self.covariance * (self.scale * self.scale)
    }

    /// Same `Σ`, scale multiplied by `factor`.
    pub fn widened(&self, factor: f64) -> Result<Self> {
        Self::new(self.covariance.clone(), self.scale * factor)
    }

    pub fn propose(&self, theta: &ParameterPoint, rng: &mut RngStream) -> Result<ParameterPoint> {
        let d = self.dim();
        if theta.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: theta.dim() });
        }
        let z = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let step = &self.chol * z;
        ParameterPoint::new(theta.as_slice().iter().zip(step.iter()).map(|(x, s)| x + self.scale * s).collect())
    }

    /// Symmetric kernel: the log transition ratio is always 0.
    pub fn log_ratio(&self, _to: &ParameterPoint, _from: &ParameterPoint) -> f64 {
        0.0
    }
}
