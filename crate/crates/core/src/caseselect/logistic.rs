use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{CaseGroup, LabeledCases};
use crate::error::{Error, Result};

const RIDGE: f64 = 1e-4;
const MAX_ITER: usize = 200;
const SATURATION: f64 = 30.0;

/// `P(first case | θ*) = σ(b₀ + Σ bⱼ θ*ⱼ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    /// Intercept first.
    pub coefficients: Vec<f64>,
    /// Ridge penalty used, 0 for plain maximum likelihood.
    pub ridge: f64,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn log1p_exp(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

impl LogisticModel {
    pub fn probability(&self, theta_star: &[f64]) -> f64 {
        let eta = self.coefficients[0] + self.coefficients[1..].iter().zip(theta_star).map(|(b, x)| b * x).sum::<f64>();
        sigmoid(eta)
    }
}

struct Fit {
    gamma: DVector<f64>,
    converged: bool,
    max_eta: f64,
}

fn penalized_objective(x: &DMatrix<f64>, y: &[f64], g: &DVector<f64>, ridge: f64) -> f64 {
    let eta = x * g;
    let ll: f64 = eta.iter().zip(y).map(|(e, yi)| yi * e - log1p_exp(*e)).sum();
    ll - 0.5 * ridge * g.norm_squared()
}

fn newton(x: &DMatrix<f64>, y: &[f64], ridge: f64) -> Fit {
    let (n, p) = x.shape();
    let mut g = DVector::zeros(p);
    let mut obj = penalized_objective(x, y, &g, ridge);
    let mut converged = false;
    for _ in 0..MAX_ITER {
        let eta = x * &g;
        let prob: Vec<f64> = eta.iter().map(|e| sigmoid(*e)).collect();
        let resid = DVector::from_fn(n, |i, _| y[i] - prob[i]);
        let grad = x.transpose() * resid - &g * ridge;
        let mut hess = DMatrix::from_diagonal_element(p, p, ridge);
        for (i, pr) in prob.iter().enumerate() {
            let w = pr * (1.0 - pr);
            let row = x.row(i);
            hess += w * row.transpose() * row;
        }
        let Some(step) = hess.clone().cholesky().map(|c| c.solve(&grad)).or_else(|| hess.lu().solve(&grad)) else {
            break;
        };
        let mut t = 1.0;
        let mut next = &g + &step * t;
        let mut next_obj = penalized_objective(x, y, &next, ridge);
        while next_obj < obj - 1e-12 && t > 1e-8 {
            t *= 0.5;
            next = &g + &step * t;
            next_obj = penalized_objective(x, y, &next, ridge);
        }
        let change = (&next - &g).amax();
        g = next;
        obj = next_obj;
        if change < 1e-10 {
            converged = true;
            break;
        }
    }
    let max_eta = (x * &g).amax();
    Fit { gamma: g, converged, max_eta }
}

/// Maximum-likelihood logistic fit on the `θ*` coordinates of one group.
///
/// Falls back to a ridge penalty of 1e-4 on all standardised coefficients when the
/// classes are separable or only one class is present.
pub fn fit_logistic(labels: &LabeledCases, group: CaseGroup) -> Result<LogisticModel> {
    let (rows, ys) = labels.group_rows(group);
    if rows.is_empty() {
        return Err(Error::InsufficientData(format!("no labelled rows in {group:?}")));
    }
    let d = rows[0].len() - 1;
    let n = rows.len();
    let mut mean = vec![0.0; d];
    let mut scale = vec![1.0; d];
    for j in 0..d {
        mean[j] = rows.iter().map(|r| r[j]).sum::<f64>() / n as f64;
        let var = rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n as f64;
        if var > 0.0 {
            scale[j] = var.sqrt();
        }
    }
    let x = DMatrix::from_fn(n, d + 1, |i, j| if j == 0 { 1.0 } else { (rows[i][j - 1] - mean[j - 1]) / scale[j - 1] });
    let y: Vec<f64> = ys.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();

    let mut fit = newton(&x, &y, 0.0);
    let mut ridge = 0.0;
    if !fit.converged || fit.max_eta > SATURATION || fit.gamma.iter().any(|v| !v.is_finite()) {
        fit = newton(&x, &y, RIDGE);
        ridge = RIDGE;
    }
    let g = fit.gamma;
    let mut coefficients = vec![g[0]];
    for j in 0..d {
        coefficients.push(g[j + 1] / scale[j]);
        coefficients[0] -= g[j + 1] * mean[j] / scale[j];
    }
    Ok(LogisticModel { coefficients, ridge })
}
