use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::optim::NelderMead;
use super::{build_features, feature_len, TrainingDataset};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::types::ParameterPoint;

const LN_2PI: f64 = 1.837_877_066_409_345_5;
const JITTER_STEPS: [f64; 6] = [0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6];

/// Kernel and trend parameters. Length scales are in standardised input units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpHyperparams {
    pub beta: Vec<f64>,
    pub signal_variance: f64,
    pub length_scales: Vec<f64>,
    pub nugget_variance: f64,
}

/// Everything needed to rebuild a fitted GP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpModelSpec {
    pub hyper: GpHyperparams,
    pub input_mean: Vec<f64>,
    pub input_scale: Vec<f64>,
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub mean: f64,
    pub variance: f64,
}

#[derive(Debug, Clone)]
pub struct GpFitOptions {
    /// Rows used during hyperparameter search; the final fit uses all rows.
    pub max_opt_rows: usize,
    pub restarts: usize,
    pub max_evals: usize,
    pub seed: u64,
}

impl Default for GpFitOptions {
    fn default() -> Self {
        Self { max_opt_rows: 400, restarts: 2, max_evals: 500, seed: 0 }
    }
}

/// Fitted GP: trend `h(θ)ᵀβ` plus ARD squared-exponential residual process.
#[derive(Debug, Clone)]
pub struct GpModel {
    spec: GpModelSpec,
    z: Vec<f64>,
    chol: DMatrix<f64>,
    alpha: Vec<f64>,
    jitter: f64,
}

struct Factor {
    chol: DMatrix<f64>,
    jitter: f64,
}

fn sq_dist(a: &[f64], b: &[f64], ls: &[f64]) -> f64 {
    a.iter().zip(b).zip(ls).map(|((x, y), l)| ((x - y) / l).powi(2)).sum()
}

fn covariance(z: &[f64], n: usize, d: usize, sf2: f64, ls: &[f64], nugget: f64) -> DMatrix<f64> {
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = sf2 + nugget;
        for j in 0..i {
            let v = sf2 * (-0.5 * sq_dist(&z[i * d..(i + 1) * d], &z[j * d..(j + 1) * d], ls)).exp();
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

fn factorize(k: &DMatrix<f64>) -> Result<Factor> {
    let n = k.nrows();
    let scale = (0..n).map(|i| k[(i, i)]).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    for &step in &JITTER_STEPS {
        let jitter = step * scale;
        let mut m = k.clone();
        for i in 0..n {
            m[(i, i)] += jitter;
        }
        if let Some(c) = m.cholesky() {
            return Ok(Factor { chol: c.unpack(), jitter });
        }
    }
    Err(Error::NotPositiveDefinite(JITTER_STEPS[JITTER_STEPS.len() - 1] * scale))
}

/// Solves `L x = b` in place for lower-triangular column-major `L`.
fn forward_solve(l: &DMatrix<f64>, b: &mut [f64]) {
    let n = l.nrows();
    let data = l.as_slice();
    for j in 0..n {
        let col = &data[j * n..(j + 1) * n];
        b[j] /= col[j];
        let bj = b[j];
        if bj != 0.0 {
            for (bi, lij) in b[j + 1..].iter_mut().zip(&col[j + 1..]) {
                *bi -= bj * lij;
            }
        }
    }
}

fn backward_solve(l: &DMatrix<f64>, b: &mut [f64]) {
    let n = l.nrows();
    let data = l.as_slice();
    for j in (0..n).rev() {
        let col = &data[j * n..(j + 1) * n];
        let dot: f64 = b[j + 1..].iter().zip(&col[j + 1..]).map(|(x, y)| x * y).sum();
        b[j] = (b[j] - dot) / col[j];
    }
}

/// GLS trend coefficients and profiled log marginal likelihood.
fn profile(chol: &DMatrix<f64>, h: &DMatrix<f64>, y: &[f64]) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let n = y.len();
    let p = h.ncols();
    let mut wh = h.clone();
    for c in 0..p {
        forward_solve(chol, wh.column_mut(c).as_mut_slice());
    }
    let mut wy = y.to_vec();
    forward_solve(chol, &mut wy);
    let qr = wh.qr();
    let q = qr.q();
    let r = qr.r();
    let qty = q.transpose() * DVector::from_column_slice(&wy);
    let beta = r
        .solve_upper_triangular(&qty)
        .filter(|b| b.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::InsufficientData("trend design matrix is rank deficient".into()))?;
    let mut resid: Vec<f64> = (0..n).map(|i| y[i] - (0..p).map(|c| h[(i, c)] * beta[c]).sum::<f64>()).collect();
    let mut white = resid.clone();
    forward_solve(chol, &mut white);
    let quad: f64 = white.iter().map(|v| v * v).sum();
    let logdet: f64 = 2.0 * (0..n).map(|i| chol[(i, i)].ln()).sum::<f64>();
    let lml = -0.5 * quad - 0.5 * logdet - 0.5 * n as f64 * LN_2PI;
    forward_solve(chol, &mut resid);
    backward_solve(chol, &mut resid);
    Ok((beta.iter().copied().collect(), resid, lml))
}

fn standardize(data: &TrainingDataset) -> (Vec<f64>, Vec<f64>) {
    let d = data.dim();
    let n = data.len() as f64;
    let mut mean = vec![0.0; d];
    let mut scale = vec![1.0; d];
    for j in 0..d {
        mean[j] = data.proposals.iter().map(|p| p[j]).sum::<f64>() / n;
        let var = data.proposals.iter().map(|p| (p[j] - mean[j]).powi(2)).sum::<f64>() / n;
        if var > 0.0 {
            scale[j] = var.sqrt();
        }
    }
    (mean, scale)
}

fn design(z: &[f64], n: usize, d: usize) -> DMatrix<f64> {
    let p = feature_len(d);
    let mut h = DMatrix::zeros(n, p);
    for i in 0..n {
        for (c, v) in build_features(&z[i * d..(i + 1) * d]).into_iter().enumerate() {
            h[(i, c)] = v;
        }
    }
    h
}

fn check_data(data: &TrainingDataset) -> Result<()> {
    let p = feature_len(data.dim());
    if data.is_empty() || data.len() <= p {
        return Err(Error::InsufficientData(format!("{} training rows for {} trend features", data.len(), p)));
    }
    if data.logliks.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite GP training target".into()));
    }
    Ok(())
}

impl GpModel {
    /// Builds the model for fixed kernel parameters; β is obtained by GLS.
    pub fn with_hyperparams(
        data: &TrainingDataset,
        signal_variance: f64,
        length_scales: &[f64],
        nugget_variance: f64,
    ) -> Result<Self> {
        check_data(data)?;
        if length_scales.len() != data.dim() {
            return Err(Error::DimensionMismatch { expected: data.dim(), got: length_scales.len() });
        }
        let (input_mean, input_scale) = standardize(data);
        let spec = GpModelSpec {
            hyper: GpHyperparams {
                beta: Vec::new(),
                signal_variance,
                length_scales: length_scales.to_vec(),
                nugget_variance,
            },
            input_mean,
            input_scale,
            inputs: data.proposals.iter().map(ParameterPoint::to_vec).collect(),
            targets: data.logliks.clone(),
        };
        Self::build(spec, true)
    }

    /// Rebuilds a model from its serialised form.
    pub fn from_spec(spec: GpModelSpec) -> Result<Self> {
        let d = spec.input_mean.len();
        let n = spec.inputs.len();
        if spec.input_scale.len() != d
            || spec.hyper.length_scales.len() != d
            || spec.targets.len() != n
            || spec.hyper.beta.len() != feature_len(d)
            || spec.inputs.iter().any(|r| r.len() != d)
        {
            return Err(Error::InvalidParameter("inconsistent GP model dimensions".into()));
        }
        Self::build(spec, false)
    }

    fn build(mut spec: GpModelSpec, estimate_beta: bool) -> Result<Self> {
        let h = &spec.hyper;
        if !(h.signal_variance > 0.0)
            || !(h.nugget_variance >= 0.0)
            || h.length_scales.iter().any(|l| !(*l > 0.0) || !l.is_finite())
        {
            return Err(Error::InvalidParameter("GP hyperparameters must be positive".into()));
        }
        let n = spec.inputs.len();
        let d = spec.input_mean.len();
        let z = spec
            .inputs
            .iter()
            .flat_map(|r| r.iter().zip(&spec.input_mean).zip(&spec.input_scale).map(|((x, m), s)| (x - m) / s))
            .collect::<Vec<_>>();
        let k = covariance(&z, n, d, h.signal_variance, &h.length_scales, h.nugget_variance);
        let f = factorize(&k)?;
        let hm = design(&z, n, d);
        if estimate_beta {
            spec.hyper.beta = profile(&f.chol, &hm, &spec.targets)?.0;
        }
        let mut alpha: Vec<f64> = (0..n)
            .map(|i| spec.targets[i] - (0..hm.ncols()).map(|c| hm[(i, c)] * spec.hyper.beta[c]).sum::<f64>())
            .collect();
        forward_solve(&f.chol, &mut alpha);
        backward_solve(&f.chol, &mut alpha);
        Ok(Self { spec, z, chol: f.chol, alpha, jitter: f.jitter })
    }

    pub fn spec(&self) -> &GpModelSpec {
        &self.spec
    }

    pub fn hyperparams(&self) -> &GpHyperparams {
        &self.spec.hyper
    }

    pub fn dim(&self) -> usize {
        self.spec.input_mean.len()
    }

    pub fn n_train(&self) -> usize {
        self.spec.targets.len()
    }

    /// Diagonal jitter that was needed to factorise the covariance.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    fn standardized(&self, theta: &[f64]) -> Vec<f64> {
        theta.iter().zip(&self.spec.input_mean).zip(&self.spec.input_scale).map(|((x, m), s)| (x - m) / s).collect()
    }

    /// Trend part `h(θ)ᵀβ` of the predictive mean.
    pub fn trend(&self, theta: &[f64]) -> f64 {
        build_features(&self.standardized(theta)).iter().zip(&self.spec.hyper.beta).map(|(a, b)| a * b).sum()
    }

    pub fn predict(&self, theta: &[f64]) -> Result<Prediction> {
        let d = self.dim();
        if theta.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: theta.len() });
        }
        let h = &self.spec.hyper;
        let zq = self.standardized(theta);
        let mut k: Vec<f64> = self
            .z
            .chunks_exact(d)
            .map(|zi| h.signal_variance * (-0.5 * sq_dist(&zq, zi, &h.length_scales)).exp())
            .collect();
        let trend: f64 = build_features(&zq).iter().zip(&h.beta).map(|(a, b)| a * b).sum();
        let mean = trend + k.iter().zip(&self.alpha).map(|(a, b)| a * b).sum::<f64>();
        forward_solve(&self.chol, &mut k);
        let explained: f64 = k.iter().map(|v| v * v).sum();
        let variance = (h.signal_variance + h.nugget_variance - explained).max(0.0);
        Ok(Prediction { mean, variance })
    }

    pub fn predict_many(&self, thetas: &[ParameterPoint]) -> Result<Vec<Prediction>> {
        thetas.iter().map(|t| self.predict(t.as_slice())).collect()
    }

    /// Profiled log marginal likelihood of the training targets.
    pub fn log_marginal_likelihood(&self) -> Result<f64> {
        let n = self.n_train();
        let (_, _, lml) = profile(&self.chol, &design(&self.z, n, self.dim()), &self.spec.targets)?;
        Ok(lml)
    }
}

pub fn gp_predict(model: &GpModel, theta: &ParameterPoint) -> Result<Prediction> {
    model.predict(theta.as_slice())
}

/// One draw `ℓ_GP(θ) ~ N(m(θ), s²(θ))`.
pub fn gp_sample_loglik(model: &GpModel, theta: &ParameterPoint, rng: &mut RngStream) -> Result<f64> {
    let p = model.predict(theta.as_slice())?;
    let z: f64 = rng.sample(StandardNormal);
    Ok(p.mean + p.variance.sqrt() * z)
}

fn neg_profile(params: &[f64], z: &[f64], n: usize, d: usize, h: &DMatrix<f64>, y: &[f64], v: f64) -> f64 {
    let lv = v.ln();
    let (lsf, lls, lnug) = (params[0], &params[1..=d], params[d + 1]);
    let out_of_box = !(lv - 12.0..=lv + 6.0).contains(&lsf)
        || !(lv - 25.0..=lv + 2.0).contains(&lnug)
        || lls.iter().any(|l| !(-4.0..=5.0).contains(l));
    if out_of_box {
        return f64::INFINITY;
    }
    let ls: Vec<f64> = lls.iter().map(|l| l.exp()).collect();
    let k = covariance(z, n, d, lsf.exp(), &ls, lnug.exp());
    match factorize(&k).and_then(|f| profile(&f.chol, h, y)) {
        Ok((_, _, lml)) => -lml,
        Err(_) => f64::INFINITY,
    }
}

/// Fits trend and kernel parameters by maximising the profiled marginal likelihood.
pub fn fit_gp(data: &TrainingDataset, opts: &GpFitOptions) -> Result<GpModel> {
    check_data(data)?;
    let n = data.len();
    let d = data.dim();
    let (mean, scale) = standardize(data);
    let rows: Vec<usize> = if n > opts.max_opt_rows.max(feature_len(d) + 1) {
        let m = opts.max_opt_rows.max(feature_len(d) + 1);
        (0..m).map(|i| i * n / m).collect()
    } else {
        (0..n).collect()
    };
    let m = rows.len();
    let (mean, scale) = (&mean, &scale);
    let z: Vec<f64> =
        rows.iter().flat_map(|&i| (0..d).map(move |j| (data.proposals[i][j] - mean[j]) / scale[j])).collect();
    let y: Vec<f64> = rows.iter().map(|&i| data.logliks[i]).collect();
    let h = design(&z, m, d);

    // Scale of the trend residuals sets the variance search box.
    let ols = DMatrix::identity(m, m);
    let v = match profile(&ols, &h, &y) {
        Ok((_, r, _)) => (r.iter().map(|x| x * x).sum::<f64>() / m as f64).max(1e-12),
        Err(e) => return Err(e),
    };

    let mut starts = vec![{
        let mut s = vec![(0.8 * v).ln()];
        s.extend(std::iter::repeat_n(0.0, d));
        s.push((0.2 * v).ln());
        s
    }];
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for _ in 0..opts.restarts {
        let mut s = vec![(v * rng.random_range(0.1..2.0f64)).ln()];
        s.extend((0..d).map(|_| rng.random_range(-1.0..1.5f64)));
        s.push((v * rng.random_range(0.001..0.5f64)).ln());
        starts.push(s);
    }
    let nm = NelderMead { max_evals: opts.max_evals, tol: 1e-6, initial_step: 0.5 };
    let mut best: Option<(Vec<f64>, f64)> = None;
    for s in &starts {
        let (x, fx) = nm.minimize(|p| neg_profile(p, &z, m, d, &h, &y, v), s);
        if fx.is_finite() && best.as_ref().is_none_or(|b| fx < b.1) {
            best = Some((x, fx));
        }
    }
    let (x, _) = best.ok_or(Error::NotPositiveDefinite(0.0))?;
    let ls: Vec<f64> = x[1..=d].iter().map(|l| l.exp()).collect();
    GpModel::with_hyperparams(data, x[0].exp(), &ls, x[d + 1].exp())
}
