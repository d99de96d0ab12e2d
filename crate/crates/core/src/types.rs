use std::fmt;
use std::ops::Index;

use serde::{Deserialize, Serialize};

use crate::caseselect::CaseLabel;
use crate::error::{Error, Result};

/// A point in the sampling coordinates (log-scale model parameters).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ParameterPoint(Vec<f64>);

impl ParameterPoint {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput("parameter point"));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite coordinate {v}")));
        }
        Ok(Self(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.0.clone()
    }
}

impl TryFrom<Vec<f64>> for ParameterPoint {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ParameterPoint> for Vec<f64> {
    fn from(p: ParameterPoint) -> Self {
        p.0
    }
}

impl Index<usize> for ParameterPoint {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl fmt::Display for ParameterPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v:.4}")?;
        }
        write!(f, "]")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LogLikSource {
    ParticleFilter,
    GpDraw,
    Exact,
}

/// A natural-log likelihood value tagged with where it came from.
///
/// `-inf` is a legal value (the likelihood is zero); NaN is not.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogLikEstimate {
    pub value: f64,
    pub source: LogLikSource,
}

impl LogLikEstimate {
    pub fn new(value: f64, source: LogLikSource) -> Result<Self> {
        if value.is_nan() || value == f64::INFINITY {
            return Err(Error::InvalidParameter(format!("log-likelihood must be finite or -inf, got {value}")));
        }
        Ok(Self { value, source })
    }

    pub fn exact(value: f64) -> Result<Self> {
        Self::new(value, LogLikSource::Exact)
    }

    pub fn is_impossible(&self) -> bool {
        self.value == f64::NEG_INFINITY
    }
}

/// Which kernel of the mixture produced an iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    /// Plain Metropolis-Hastings with the expensive likelihood.
    Mh,
    /// Two-stage delayed acceptance.
    Da,
}

impl Branch {
    pub fn as_str(self) -> &'static str {
        match self {
            Branch::Mh => "mh",
            Branch::Da => "da",
        }
    }
}

/// What happened during one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationEvent {
    pub stage1_passed: bool,
    pub case: Option<CaseLabel>,
    pub pf_calls: u32,
    pub accepted: bool,
    pub branch: Branch,
}

impl IterationEvent {
    pub fn used_mh_branch(&self) -> bool {
        self.branch == Branch::Mh
    }

    pub fn early_rejected(&self) -> bool {
        self.branch == Branch::Da && !self.stage1_passed
    }
}

/// Output of a sampler run.
#[derive(Debug, Clone, Default)]
pub struct ChainResult {
    pub samples: Vec<ParameterPoint>,
    pub logliks: Vec<LogLikEstimate>,
    pub events: Vec<IterationEvent>,
    pub burnin: usize,
    pub wall_time: f64,
}

impl ChainResult {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.samples.first().map_or(0, ParameterPoint::dim)
    }

    /// Post-burnin values of coordinate `j`.
    pub fn coordinate(&self, j: usize) -> Vec<f64> {
        self.samples[self.burnin.min(self.len())..].iter().map(|p| p[j]).collect()
    }

    pub fn post_burnin_events(&self) -> &[IterationEvent] {
        &self.events[self.burnin.min(self.events.len())..]
    }

    pub fn last(&self) -> Option<(&ParameterPoint, &LogLikEstimate)> {
        self.samples.last().zip(self.logliks.last())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_point_rejects_non_finite() {
        assert!(ParameterPoint::new(vec![1.0, f64::NAN]).is_err());
        assert!(ParameterPoint::new(vec![f64::INFINITY]).is_err());
        assert!(ParameterPoint::new(vec![]).is_err());
        assert_eq!(ParameterPoint::new(vec![1.0, 2.0]).unwrap().dim(), 2);
    }

    #[test]
    fn loglik_allows_neg_inf_only() {
        assert!(LogLikEstimate::exact(f64::NEG_INFINITY).unwrap().is_impossible());
        assert!(LogLikEstimate::exact(f64::NAN).is_err());
        assert!(LogLikEstimate::exact(f64::INFINITY).is_err());
    }
}
