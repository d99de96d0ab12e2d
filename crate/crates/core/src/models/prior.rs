use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::ParameterPoint;

/// Prior on a single sampling coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PriorComponent {
    Uniform {
        low: f64,
        high: f64,
    },
    Normal {
        mean: f64,
        sd: f64,
    },
    /// Improper constant density (log density 0); used for generic targets.
    Flat,
}

impl PriorComponent {
    fn validate(&self) -> Result<()> {
        match *self {
            PriorComponent::Uniform { low, high } if !(low < high) || !low.is_finite() || !high.is_finite() => {
                Err(Error::InvalidParameter(format!("uniform prior needs low < high, got [{low}, {high}]")))
            }
            PriorComponent::Normal { mean, sd } if !(sd > 0.0) || !mean.is_finite() || !sd.is_finite() => {
                Err(Error::InvalidParameter(format!("normal prior needs sd > 0, got {sd}")))
            }
            _ => Ok(()),
        }
    }

    pub fn log_density(&self, x: f64) -> f64 {
        match *self {
            PriorComponent::Uniform { low, high } => {
                if (low..=high).contains(&x) {
                    -(high - low).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            PriorComponent::Normal { mean, sd } => {
                let z = (x - mean) / sd;
                -0.5 * z * z - sd.ln() - 0.5 * (2.0 * PI).ln()
            }
            PriorComponent::Flat => 0.0,
        }
    }
}

/// Independent per-coordinate prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<PriorComponent>", into = "Vec<PriorComponent>")]
pub struct Prior {
    components: Vec<PriorComponent>,
}

impl Prior {
    pub fn new(components: Vec<PriorComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::EmptyInput("prior specification"));
        }
        for c in &components {
            c.validate()?;
        }
        Ok(Self { components })
    }

    /// Prior ≡ 1 in `dim` dimensions.
    pub fn flat(dim: usize) -> Self {
        Self { components: vec![PriorComponent::Flat; dim] }
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[PriorComponent] {
        &self.components
    }

    pub fn eval_log_prior(&self, theta: &ParameterPoint) -> Result<f64> {
        if theta.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: theta.dim() });
        }
        Ok(self.components.iter().zip(theta.as_slice()).map(|(c, &x)| c.log_density(x)).sum())
    }
}

impl TryFrom<Vec<PriorComponent>> for Prior {
    type Error = Error;

    fn try_from(c: Vec<PriorComponent>) -> Result<Self> {
        Self::new(c)
    }
}

impl From<Prior> for Vec<PriorComponent> {
    fn from(p: Prior) -> Self {
        p.components
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(v: &[f64]) -> ParameterPoint {
        ParameterPoint::new(v.to_vec()).unwrap()
    }

    #[test]
    fn uniform_examples() {
        let prior = Prior::new(vec![PriorComponent::Uniform { low: 0.0, high: 10.0 }]).unwrap();
        assert!((prior.eval_log_prior(&p(&[5.0])).unwrap() - 0.1f64.ln()).abs() < 1e-15);
        assert_eq!(prior.eval_log_prior(&p(&[-1.0])).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn normal_mode() {
        let prior = Prior::new(vec![PriorComponent::Normal { mean: -0.7, sd: 0.8 }]).unwrap();
        let expected = -(0.8 * (2.0 * PI).sqrt()).ln();
        assert!((prior.eval_log_prior(&p(&[-0.7])).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn malformed_specs() {
        assert!(Prior::new(vec![PriorComponent::Uniform { low: 1.0, high: 1.0 }]).is_err());
        assert!(Prior::new(vec![PriorComponent::Normal { mean: 0.0, sd: 0.0 }]).is_err());
        assert!(Prior::new(vec![]).is_err());
        let prior = Prior::flat(2);
        assert!(prior.eval_log_prior(&p(&[1.0])).is_err());
        assert_eq!(prior.eval_log_prior(&p(&[1.0, 1e9])).unwrap(), 0.0);
    }

    #[test]
    fn serde_shape() {
        let prior = Prior::new(vec![
            PriorComponent::Uniform { low: 0.0, high: 4.0 },
            PriorComponent::Normal { mean: 0.0, sd: 0.5 },
        ])
        .unwrap();
        let json = serde_json::to_string(&prior).unwrap();
        assert_eq!(json, r#"[{"kind":"uniform","low":0.0,"high":4.0},{"kind":"normal","mean":0.0,"sd":0.5}]"#);
    }
}
