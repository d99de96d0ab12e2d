//! The pipeline phases. Each is a pure function of the configuration, the
//! files already in the output directory and the seed.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::{Path, PathBuf};

use adamcmc::caseselect::{
    fit_biased_coin, fit_selector, label_training_cases, select_case, CaseGroup, LabeledCases, TreeOptions,
};
use adamcmc::samplers::{run_ada, run_da, run_mcwm, run_pmcmc, AmConfig, McmcOutput};
use adamcmc::stats::{mean, variance};
use adamcmc::surrogate::{fit_gp, GpFitOptions};
use adamcmc::surrogate::{trim_training_data, ChainAligned};
use adamcmc::{
    CaseLabel, CaseSelector, ChainResult, DaConfig, DaKernels, GpModel, LikelihoodEstimator, McmcConfig,
    ParameterPoint, Prior, ProposalKernel, Purpose, RngStream, StreamFamily, TimeSeries, TrainingDataset,
};
use anyhow::{bail, Context as _, Result};
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::artifacts::{
    chain_csv, ensure_writable, marginals_csv, read_chain_csv, read_json, read_points_csv, report_json,
    write_chain_csv, write_json, write_points_csv, write_text, ChainRow, DataSidecar, HarvestSummary, Layout,
    ModelFile, MODEL_FORMAT_VERSION,
};
use crate::config::{Algorithm, ModelKind, PipelineConfig};
use crate::model::{pf_config, prior, unit_times, AnyModel};
use crate::report::{self, build_report, chain_rows, RunReport};

/// One pipeline invocation: configuration, output directory and overwrite policy.
#[derive(Debug, Clone)]
pub struct Context {
    pub cfg: PipelineConfig,
    pub layout: Layout,
    pub force: bool,
}

#[derive(Debug, Clone, Copy)]
enum Phase {
    Simulate = 1,
    Pilot,
    Harvest,
    Fit,
    Label,
    Run,
    Predict,
    Warmup,
}

/// Seed for one phase, derived from the configuration seed.
fn phase_seed(seed: u64, phase: Phase) -> u64 {
    RngStream::new(seed, 0x5EED_0000 + phase as u64).next_u64()
}

fn note(msg: impl AsRef<str>) {
    eprintln!("{}", msg.as_ref());
}

impl Context {
    pub fn new(cfg: PipelineConfig, out: impl Into<PathBuf>, force: bool) -> Self {
        Self { cfg, layout: Layout::new(out), force }
    }

    fn model(&self) -> AnyModel {
        AnyModel::from_config(&self.cfg)
    }

    fn am(&self, target: f64) -> AmConfig {
        AmConfig { target, adapt_start: self.cfg.harvest.adapt_start, ..AmConfig::default() }
    }

    /// Observations from `data.csv` with `x0` from its sidecar.
    pub fn load_data(&self) -> Result<TimeSeries> {
        let path = self.layout.data_csv();
        if !path.exists() {
            bail!("{} not found; run `adamcmc simulate` first", path.display());
        }
        let x0 = if self.layout.data_json().exists() {
            read_json::<DataSidecar>(&self.layout.data_json())?.x0
        } else {
            self.cfg.data.x0
        };
        let file = File::open(&path).with_context(|| format!("opening {}", path.display()))?;
        let data = TimeSeries::read_csv(file, x0).with_context(|| format!("reading {}", path.display()))?;
        self.model().validate_data(&data)?;
        Ok(data)
    }
}

fn point(v: &[f64]) -> Result<ParameterPoint> {
    Ok(ParameterPoint::new(v.to_vec())?)
}

/// Writes `data.csv`, simulated from `data.theta` or ingested from `data.path`.
pub fn simulate(ctx: &Context) -> Result<DataSidecar> {
    let cfg = &ctx.cfg;
    let (csv_path, json_path) = (ctx.layout.data_csv(), ctx.layout.data_json());
    ensure_writable(&[csv_path.clone(), json_path.clone()], ctx.force)?;
    let model = ctx.model();
    let (series, source) = match &cfg.data.path {
        Some(p) => {
            let file = File::open(p).with_context(|| format!("opening {p}"))?;
            let s = TimeSeries::read_csv(file, cfg.data.x0).with_context(|| format!("reading {p}"))?;
            model.validate_data(&s)?;
            (s, p.clone())
        }
        None => {
            if cfg.data.length == 0 {
                bail!("data.length must be positive");
            }
            let mut rng = RngStream::new(phase_seed(cfg.seed, Phase::Simulate), 0);
            let theta = point(&cfg.data.theta)?;
            let s = model.simulate(&theta, &unit_times(cfg.data.length), cfg.data.x0, &mut rng)?;
            (s, "simulated".to_string())
        }
    };
    std::fs::create_dir_all(&ctx.layout.root)?;
    let file = File::create(&csv_path).with_context(|| format!("creating {}", csv_path.display()))?;
    series.write_csv(file)?;
    let sidecar = DataSidecar {
        model: cfg.model,
        theta: cfg.data.theta.clone(),
        x0: series.x0(),
        seed: cfg.seed,
        length: series.len(),
        source,
    };
    write_json(&json_path, &sidecar)?;
    note(format!("simulate: {} observations -> {}", series.len(), csv_path.display()));
    Ok(sidecar)
}

fn acceptance_pct(events: &[adamcmc::IterationEvent]) -> f64 {
    if events.is_empty() {
        return 0.0;
    }
    100.0 * events.iter().filter(|e| e.accepted).count() as f64 / events.len() as f64
}

/// Runs MCWM with harvesting on and stores the training rows, the chain
/// states they were compared against and the adapted proposal.
pub fn harvest(ctx: &Context) -> Result<HarvestSummary> {
    let cfg = &ctx.cfg;
    let h = &cfg.harvest;
    if h.iterations <= h.burnin {
        bail!("harvest has zero post-burn-in iterations (iterations = {}, burnin = {})", h.iterations, h.burnin);
    }
    let l = &ctx.layout;
    ensure_writable(&[l.training_csv(), l.aligned_csv(), l.harvest_json(), l.harvest_chain()], ctx.force)?;
    let data = ctx.load_data()?;
    let model = ctx.model();
    let names = model.param_names();
    let est = model.estimator(data, pf_config(cfg)?)?;
    let prior = prior(cfg)?;
    let mut start = point(&h.start)?;
    let mut kernel = ProposalKernel::isotropic(names.len(), h.initial_sd)?;
    let mut pf_calls = 0u64;
    let mut wall = 0.0;

    if h.pilot_iterations > 0 {
        let pilot_cfg = McmcConfig {
            iterations: h.pilot_iterations,
            burnin: h.pilot_iterations,
            adapt: true,
            am: ctx.am(h.target_acceptance),
        };
        let family = StreamFamily::new(phase_seed(cfg.seed, Phase::Pilot));
        let out = run_pmcmc(&*est, &prior, &start, &kernel, &pilot_cfg, &family)?;
        note(format!(
            "harvest: pilot of {} iterations, acceptance {:.1}%",
            h.pilot_iterations,
            acceptance_pct(&out.chain.events)
        ));
        pf_calls += out.chain.events.iter().map(|e| u64::from(e.pf_calls)).sum::<u64>();
        wall += out.chain.wall_time;
        start = out.chain.last().map(|(p, _)| p.clone()).context("empty pilot chain")?;
        kernel = out.kernel;
    }

    let mcmc = McmcConfig { iterations: h.iterations, burnin: h.burnin, adapt: true, am: ctx.am(h.target_acceptance) };
    let family = StreamFamily::new(phase_seed(cfg.seed, Phase::Harvest));
    let McmcOutput { chain, kernel, training } = run_mcwm(&*est, &prior, &start, &kernel, &mcmc, &family, true)?;
    let training = training.context("harvest produced no training data")?;
    let aligned = training.chain_aligned.as_ref().context("harvest lost chain alignment")?;
    pf_calls += chain.events.iter().map(|e| u64::from(e.pf_calls)).sum::<u64>();
    wall += chain.wall_time;

    write_points_csv(&l.training_csv(), &names, &training.proposals, &training.logliks)?;
    write_points_csv(&l.aligned_csv(), &names, &aligned.states, &aligned.logliks)?;
    write_chain_csv(&l.harvest_chain(), &names, &chain_rows(&chain))?;

    let tail = &chain.events[chain.events.len().saturating_sub(1000)..];
    let tail_pct = acceptance_pct(tail);
    let mut warnings = Vec::new();
    if tail_pct < 1.0 {
        warnings.push(format!(
            "acceptance over the last {} iterations is {tail_pct:.2}%; the chain may be stuck",
            tail.len()
        ));
    }
    let summary = HarvestSummary {
        model: cfg.model,
        param_names: names,
        kernel,
        final_state: chain.last().map(|(p, _)| p.to_vec()).context("empty harvest chain")?,
        rows: training.len(),
        acceptance_pct: acceptance_pct(chain.post_burnin_events()),
        acceptance_last_1000_pct: tail_pct,
        wall_time_s: wall,
        pf_calls,
        warnings,
    };
    write_json(&l.harvest_json(), &summary)?;
    for w in &summary.warnings {
        note(format!("warning: {w}"));
    }
    note(format!(
        "harvest: {} rows, acceptance {:.1}%, {:.1}s",
        summary.rows, summary.acceptance_pct, summary.wall_time_s
    ));
    Ok(summary)
}

pub fn load_training(layout: &Layout) -> Result<TrainingDataset> {
    if !layout.training_csv().exists() || !layout.aligned_csv().exists() {
        bail!("harvest artifacts missing in {}; run `adamcmc harvest` first", layout.harvest_dir().display());
    }
    let (_, proposals, logliks) = read_points_csv(&layout.training_csv())?;
    let (_, states, aligned_ll) = read_points_csv(&layout.aligned_csv())?;
    Ok(TrainingDataset::new(proposals, logliks, Some(ChainAligned { states, logliks: aligned_ll }))?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoinEstimates {
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub p4: f64,
    pub p1_plus_p3: f64,
    pub p2_plus_p4: f64,
}

impl CoinEstimates {
    pub fn from_labels(labels: &LabeledCases) -> Result<Self> {
        let CaseSelector::Coin { p1, p2 } = fit_biased_coin(labels)? else { unreachable!("coin fit returns a coin") };
        let (p3, p4) = (1.0 - p1, 1.0 - p2);
        Ok(Self { p1, p2, p3, p4, p1_plus_p3: p1 + p3, p2_plus_p4: p2 + p4 })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpSummary {
    pub signal_variance: f64,
    pub length_scales: Vec<f64>,
    pub nugget_variance: f64,
    /// `sqrt(nugget)`: the RMSE a perfect mean function would still show.
    pub noise_floor: f64,
    pub jitter: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub rows_harvested: usize,
    pub rows_after_trim: usize,
    pub rows_train: usize,
    pub rows_holdout: usize,
    pub gp: GpSummary,
    pub holdout_rmse: f64,
    pub coin: CoinEstimates,
    pub selector: String,
    pub case_counts: BTreeMap<String, usize>,
    /// Rows: true case 1..4; columns: selected case 1..4.
    pub confusion: [[usize; 4]; 4],
    /// Per selected case, how often the selected case was the true one.
    pub assumption_holds_pct: BTreeMap<String, Option<f64>>,
    pub selection_agreement_pct: f64,
    pub warnings: Vec<String>,
}

/// Every tenth row (the 10th, 20th, ...) is held out.
fn holdout_split(data: &TrainingDataset) -> (TrainingDataset, TrainingDataset) {
    let test: Vec<bool> = (0..data.len()).map(|i| i % 10 == 9).collect();
    let train: Vec<bool> = test.iter().map(|t| !t).collect();
    (data.filter_rows(&train), data.filter_rows(&test))
}

/// Fits the GP surrogate on trimmed harvest rows and the case selector on
/// labels computed from the untrimmed harvest.
pub fn fit(ctx: &Context) -> Result<FitReport> {
    let cfg = &ctx.cfg;
    let f = &cfg.fit;
    let l = &ctx.layout;
    ensure_writable(&[l.model_json(), l.fit_report()], ctx.force)?;
    let data = load_training(l)?;
    let names = ctx.model().param_names();
    if data.dim() != names.len() {
        bail!("training rows have {} columns but the {} model has {}", data.dim(), cfg.model, names.len());
    }
    let trimmed = trim_training_data(&data, f.trim_fraction)?.finite_only();
    let (train, test) = holdout_split(&trimmed);
    let opts = GpFitOptions {
        max_opt_rows: f.max_opt_rows,
        restarts: f.restarts,
        seed: phase_seed(cfg.seed, Phase::Fit),
        ..GpFitOptions::default()
    };
    let gp = fit_gp(&train, &opts)?;
    let sq: Vec<f64> = test
        .proposals
        .iter()
        .zip(&test.logliks)
        .map(|(p, y)| Ok((gp.predict(p.as_slice())?.mean - y).powi(2)))
        .collect::<Result<_>>()?;
    let holdout_rmse = if sq.is_empty() { f64::NAN } else { mean(&sq).sqrt() };
    let hp = gp.hyperparams();
    let gp_summary = GpSummary {
        signal_variance: hp.signal_variance,
        length_scales: hp.length_scales.clone(),
        nugget_variance: hp.nugget_variance,
        noise_floor: hp.nugget_variance.sqrt(),
        jitter: gp.jitter(),
    };

    let mut label_rng = StreamFamily::new(phase_seed(cfg.seed, Phase::Label)).root(Purpose::GpDraw);
    let labels = label_training_cases(&data, &gp, &mut label_rng)?;
    let coin = CoinEstimates::from_labels(&labels)?;
    let tree_opts = TreeOptions { max_depth: f.max_depth, min_leaf: f.min_leaf };
    let selector = fit_selector(f.selector, &labels, &tree_opts)?;

    let mut select_rng = StreamFamily::new(phase_seed(cfg.seed, Phase::Label)).root(Purpose::CaseSelection);
    let mut confusion = [[0usize; 4]; 4];
    for (row, label) in labels.features.iter().zip(&labels.labels) {
        let d = row.len() - 1;
        let theta = point(&row[..d])?;
        let chosen = select_case(&selector, &theta, row[d], label.group() == CaseGroup::Group13, &mut select_rng);
        confusion[label.number() as usize - 1][chosen.number() as usize - 1] += 1;
    }
    let hits: usize = (0..4).map(|k| confusion[k][k]).sum();
    let assumption_holds_pct = (0..4)
        .map(|k| {
            let selected: usize = (0..4).map(|t| confusion[t][k]).sum();
            let v = (selected > 0).then(|| 100.0 * confusion[k][k] as f64 / selected as f64);
            (format!("case{}", k + 1), v)
        })
        .collect();
    let case_counts = CaseLabel::ALL.iter().map(|c| (format!("case{}", c.number()), labels.count(*c))).collect();

    let mut warnings = Vec::new();
    if let Some(limit) = f.rmse_warning {
        if !(holdout_rmse <= limit) {
            warnings.push(format!("held-out GP RMSE {holdout_rmse:.3} exceeds the configured limit {limit}"));
        }
    }
    let report = FitReport {
        rows_harvested: data.len(),
        rows_after_trim: trimmed.len(),
        rows_train: train.len(),
        rows_holdout: test.len(),
        gp: gp_summary,
        holdout_rmse,
        coin,
        selector: selector.kind().as_str().to_string(),
        case_counts,
        confusion,
        assumption_holds_pct,
        selection_agreement_pct: 100.0 * hits as f64 / labels.len().max(1) as f64,
        warnings,
    };
    let file = ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        model: cfg.model,
        param_names: names,
        gp: gp.spec().clone(),
        selector,
    };
    write_json(&l.model_json(), &file)?;
    write_json(&l.fit_report(), &report)?;
    for w in &report.warnings {
        note(format!("warning: {w}"));
    }
    note(format!(
        "fit: {} training rows, held-out RMSE {:.3} (noise floor {:.3}), coin p1={:.3} p2={:.3}",
        report.rows_train, report.holdout_rmse, report.gp.noise_floor, report.coin.p1, report.coin.p2
    ));
    Ok(report)
}

fn fingerprint(cfg: &PipelineConfig, alg: Algorithm, data: &TimeSeries) -> BTreeMap<String, String> {
    let mut fp = BTreeMap::new();
    let mut put = |k: &str, v: String| {
        fp.insert(k.to_string(), v);
    };
    put("model", cfg.model.to_string());
    put("data_length", data.len().to_string());
    put("particles", cfg.pf.particles.to_string());
    put("replicates", cfg.pf.replicates.to_string());
    put("resampling", format!("{:?}", cfg.pf.resampling).to_lowercase());
    match alg {
        Algorithm::Da | Algorithm::Ada => {
            put("iterations", cfg.run.da_iterations.to_string());
            put("burnin", cfg.run.da_burnin.to_string());
            put("beta_mh", cfg.run.beta_mh.to_string());
            put("wide_scale", cfg.run.wide_scale.to_string());
            put("refresh_second_stage", cfg.run.refresh_second_stage.to_string());
        }
        Algorithm::Pmcmc | Algorithm::Mcwm => {
            put("iterations", cfg.run.iterations.to_string());
            put("burnin", cfg.run.burnin.to_string());
            put("pmcmc_warmup_refresh", cfg.run.pmcmc_warmup_refresh.to_string());
        }
    }
    fp
}

/// Everything DA and ADA read from earlier phases.
struct DaInputs {
    harvest: HarvestSummary,
    gp: GpModel,
    selector: CaseSelector,
}

fn load_da_inputs(ctx: &Context) -> Result<DaInputs> {
    let l = &ctx.layout;
    if !l.harvest_json().exists() {
        bail!("{} not found; run `adamcmc harvest` first", l.harvest_json().display());
    }
    if !l.model_json().exists() {
        bail!("{} not found; run `adamcmc fit` first", l.model_json().display());
    }
    let harvest: HarvestSummary = read_json(&l.harvest_json())?;
    let file = ModelFile::load(&l.model_json())?;
    if file.model != ctx.cfg.model || harvest.model != ctx.cfg.model {
        bail!("fit artifacts were produced for a different model than {}", ctx.cfg.model);
    }
    let gp = GpModel::from_spec(file.gp)?;
    Ok(DaInputs { harvest, gp, selector: file.selector })
}

/// Runs one sampler and writes its chain, report and marginal densities.
pub fn run(ctx: &Context, alg: Algorithm) -> Result<RunReport> {
    let cfg = &ctx.cfg;
    let r = &cfg.run;
    let dir = ctx.layout.run_dir(alg);
    ensure_writable(&[chain_csv(&dir), report_json(&dir), marginals_csv(&dir)], ctx.force)?;
    let data = ctx.load_data()?;
    let fp = fingerprint(cfg, alg, &data);
    let model = ctx.model();
    let names = model.param_names();
    let prior = prior(cfg)?;
    let family = StreamFamily::new(phase_seed(cfg.seed, Phase::Run));
    let da_inputs = match alg {
        Algorithm::Da | Algorithm::Ada => Some(load_da_inputs(ctx)?),
        _ => None,
    };
    let est = model.estimator(data, pf_config(cfg)?)?;
    note(format!("run {}: starting", alg.as_str()));
    let chain: ChainResult = match alg {
        Algorithm::Pmcmc | Algorithm::Mcwm => {
            let mcmc =
                McmcConfig { iterations: r.iterations, burnin: r.burnin, adapt: true, am: ctx.am(r.target_acceptance) };
            let start = point(&r.start)?;
            let kernel = ProposalKernel::isotropic(names.len(), r.initial_sd)?;
            if alg == Algorithm::Pmcmc && r.pmcmc_warmup_refresh && r.burnin > 0 {
                pmcmc_with_warmup(&*est, &prior, &start, &kernel, &mcmc, cfg.seed)?
            } else if alg == Algorithm::Pmcmc {
                run_pmcmc(&*est, &prior, &start, &kernel, &mcmc, &family)?.chain
            } else {
                run_mcwm(&*est, &prior, &start, &kernel, &mcmc, &family, false)?.chain
            }
        }
        Algorithm::Da | Algorithm::Ada => {
            let inputs = da_inputs.expect("loaded above");
            let da = DaConfig {
                iterations: r.da_iterations,
                burnin: r.da_burnin,
                beta_mh: r.beta_mh,
                refresh_second_stage: r.refresh_second_stage,
            };
            let kernels = DaKernels::from_base(&inputs.harvest.kernel, r.wide_scale)?;
            let start = point(&inputs.harvest.final_state)?;
            if alg == Algorithm::Da {
                run_da(&*est, &inputs.gp, &prior, &start, &kernels, &da, &family)?
            } else {
                run_ada(&*est, &inputs.gp, &inputs.selector, &prior, &start, &kernels, &da, &family)?
            }
        }
    };
    let rows = chain_rows(&chain);
    let report = build_report(alg, &names, &rows, chain.burnin, chain.wall_time, fp)?;
    write_chain_csv(&chain_csv(&dir), &names, &rows)?;
    write_json(&report_json(&dir), &report)?;
    write_text(&marginals_csv(&dir), &report::marginals_csv(&names, &rows[chain.burnin.min(rows.len())..], 200))?;
    note(format!(
        "run {}: {} iterations in {:.1}s, acceptance {:.1}%, min ESS {:.0}",
        alg.as_str(),
        report.total_iterations,
        report.wall_time_s,
        report.events.acceptance_pct,
        report.min_ess
    ));
    Ok(report)
}

/// Burn-in as MCWM, then pseudo-marginal MH from where it ended with the
/// adapted kernel. The two pieces are joined into one chain.
fn pmcmc_with_warmup(
    est: &dyn LikelihoodEstimator,
    prior: &Prior,
    start: &ParameterPoint,
    kernel: &ProposalKernel,
    mcmc: &McmcConfig,
    seed: u64,
) -> Result<ChainResult> {
    let burnin = mcmc.burnin.min(mcmc.iterations);
    let warm_cfg = McmcConfig { iterations: burnin, burnin, ..mcmc.clone() };
    let warm =
        run_mcwm(est, prior, start, kernel, &warm_cfg, &StreamFamily::new(phase_seed(seed, Phase::Warmup)), false)?;
    if burnin == mcmc.iterations {
        return Ok(warm.chain);
    }
    let from = warm.chain.samples.last().cloned().unwrap_or_else(|| start.clone());
    let main_cfg = McmcConfig { iterations: mcmc.iterations - burnin, burnin: 0, ..mcmc.clone() };
    let main = run_pmcmc(est, prior, &from, &warm.kernel, &main_cfg, &StreamFamily::new(phase_seed(seed, Phase::Run)))?;
    let mut chain = warm.chain;
    chain.samples.extend(main.chain.samples);
    chain.logliks.extend(main.chain.logliks);
    chain.events.extend(main.chain.events);
    chain.wall_time += main.chain.wall_time;
    chain.burnin = burnin;
    Ok(chain)
}

/// Aggregates the reports of several run directories into `out`.
pub fn compare(dirs: &[PathBuf], out: &Path, force: bool) -> Result<report::CompareReport> {
    if dirs.len() < 2 {
        bail!("compare needs at least two run directories, got {}", dirs.len());
    }
    let json = out.join("compare.json");
    let csv = out.join("compare.csv");
    ensure_writable(&[json.clone(), csv.clone()], force)?;
    let runs = dirs
        .iter()
        .map(|d| Ok((d.display().to_string(), read_json::<RunReport>(&report_json(d))?)))
        .collect::<Result<Vec<_>>>()?;
    let cmp = report::compare(&runs)?;
    write_json(&json, &cmp)?;
    write_text(&csv, &report::compare_csv(&cmp))?;
    for r in &cmp.runs[1..] {
        note(format!(
            "compare: {} vs {}: speed-up {:.2}, PF reduction {:.2}",
            r.run, cmp.baseline, r.speedup, r.pf_reduction
        ));
    }
    Ok(cmp)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeSwitches {
    pub midpoint: f64,
    pub band: f64,
    pub observed: usize,
    pub simulated_mean: f64,
    pub simulated: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictReport {
    pub chain: String,
    pub high_density_rows: usize,
    pub draws: usize,
    pub failed_draws: usize,
    pub observed_mean: f64,
    pub observed_sd: f64,
    pub simulated_mean: f64,
    pub simulated_sd: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regime_switches: Option<RegimeSwitches>,
}

/// Post-burn-in rows in the top half by log-likelihood.
pub fn high_density_rows(rows: &[ChainRow]) -> Vec<&ChainRow> {
    let mut sorted: Vec<&ChainRow> = rows.iter().collect();
    sorted.sort_by(|a, b| b.loglik.total_cmp(&a.loglik).then(a.iter.cmp(&b.iter)));
    sorted.truncate(rows.len().div_ceil(2));
    sorted
}

/// Switches between the two sides of `midpoint`, with hysteresis: a side is
/// entered only once the path is more than `band` away from the midpoint.
pub fn count_regime_switches(path: &[f64], midpoint: f64, band: f64) -> usize {
    let mut side: Option<bool> = None;
    let mut switches = 0;
    for &z in path {
        let now = if z > midpoint + band {
            Some(true)
        } else if z < midpoint - band {
            Some(false)
        } else {
            None
        };
        if let Some(s) = now {
            if side.is_some_and(|prev| prev != s) {
                switches += 1;
            }
            side = Some(s);
        }
    }
    switches
}

fn histogram(values: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in values {
        let k = (((v - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    counts.iter().map(|&c| c as f64 / (values.len() as f64 * width)).collect()
}

/// Forward-simulates from parameter rows drawn uniformly out of the chain's
/// high-density region.
pub fn predict(ctx: &Context, alg: Algorithm) -> Result<PredictReport> {
    let cfg = &ctx.cfg;
    let run_dir = ctx.layout.run_dir(alg);
    let chain_path = chain_csv(&run_dir);
    if !chain_path.exists() {
        bail!("{} not found; run `adamcmc run {}` first", chain_path.display(), alg.as_str());
    }
    let out = ctx.layout.predict_dir();
    let files = [out.join("trajectories.csv"), out.join("histogram.csv"), out.join("predict.json")];
    ensure_writable(&files, ctx.force)?;
    let (_, rows) = read_chain_csv(&chain_path)?;
    let burnin =
        if report_json(&run_dir).exists() { read_json::<RunReport>(&report_json(&run_dir))?.burnin } else { 0 };
    let post = &rows[burnin.min(rows.len())..];
    if post.is_empty() {
        bail!("{} has no post-burn-in rows to predict from", chain_path.display());
    }
    if cfg.predict.draws == 0 || cfg.predict.bins == 0 {
        bail!("predict.draws and predict.bins must be positive");
    }
    let top = high_density_rows(post);
    let data = ctx.load_data()?;
    let model = ctx.model();
    let seed = phase_seed(cfg.seed, Phase::Predict);
    let mut pick = RngStream::new(seed, 0);
    let mut traj = String::from("draw,iter,time,value\n");
    let mut sims: Vec<Vec<f64>> = Vec::new();
    let mut picked: Vec<&ChainRow> = Vec::new();
    let mut failed = 0;
    for k in 0..cfg.predict.draws {
        let row = top[pick.random_range(0..top.len())];
        let mut rng = RngStream::new(seed, k as u64 + 1);
        match model.simulate(&point(&row.theta)?, data.times(), data.x0(), &mut rng) {
            Ok(s) => {
                for (t, v) in s.times().iter().zip(s.values()) {
                    traj.push_str(&format!("{k},{},{t},{v}\n", row.iter));
                }
                sims.push(s.values().to_vec());
                picked.push(row);
            }
            Err(_) => failed += 1,
        }
    }
    if sims.is_empty() {
        bail!("every forward simulation diverged");
    }
    let all: Vec<f64> = sims.iter().flatten().copied().collect();
    let obs = data.values();
    let lo = all.iter().chain(obs).copied().fold(f64::INFINITY, f64::min);
    let hi = all.iter().chain(obs).copied().fold(f64::NEG_INFINITY, f64::max);
    let hi = if hi > lo { hi } else { lo + 1.0 };
    let bins = cfg.predict.bins;
    let (hs, ho) = (histogram(&all, lo, hi, bins), histogram(obs, lo, hi, bins));
    let mut hist = String::from("bin_low,bin_high,simulated_density,observed_density\n");
    for k in 0..bins {
        let a = lo + (hi - lo) * k as f64 / bins as f64;
        let b = lo + (hi - lo) * (k + 1) as f64 / bins as f64;
        hist.push_str(&format!("{a},{b},{},{}\n", hs[k], ho[k]));
    }
    let sd = |xs: &[f64]| if xs.len() > 1 { variance(xs).sqrt() } else { 0.0 };
    let regime_switches = (cfg.model == ModelKind::DwpSde).then(|| {
        // wells sit where |x - c|^p1 = 2d
        let m = |j: usize| mean(&picked.iter().map(|r| r.theta[j].exp()).collect::<Vec<_>>());
        let (c, d, p1) = (m(2), m(3), m(4));
        let band = 0.5 * (2.0 * d).powf(1.0 / p1);
        let simulated: Vec<usize> = sims.iter().map(|s| count_regime_switches(s, c, band)).collect();
        RegimeSwitches {
            midpoint: c,
            band,
            observed: count_regime_switches(obs, c, band),
            simulated_mean: mean(&simulated.iter().map(|&v| v as f64).collect::<Vec<_>>()),
            simulated,
        }
    });
    let report = PredictReport {
        chain: chain_path.display().to_string(),
        high_density_rows: top.len(),
        draws: sims.len(),
        failed_draws: failed,
        observed_mean: mean(obs),
        observed_sd: sd(obs),
        simulated_mean: mean(&all),
        simulated_sd: sd(&all),
        regime_switches,
    };
    write_text(&files[0], &traj)?;
    write_text(&files[1], &hist)?;
    write_json(&files[2], &report)?;
    note(format!(
        "predict: {} trajectories, simulated mean {:.3} vs observed {:.3}",
        report.draws, report.simulated_mean, report.observed_mean
    ));
    Ok(report)
}

/// simulate, harvest, fit, every configured algorithm, compare and predict.
pub fn pipeline(ctx: &Context) -> Result<()> {
    simulate(ctx)?;
    harvest(ctx)?;
    let algs = &ctx.cfg.pipeline.algorithms;
    if algs.iter().any(|a| matches!(a, Algorithm::Da | Algorithm::Ada)) {
        fit(ctx)?;
    }
    for &alg in algs {
        run(ctx, alg)?;
    }
    // only DA and ADA share settings, so only they are compared
    let dirs: Vec<PathBuf> =
        algs.iter().filter(|a| matches!(a, Algorithm::Da | Algorithm::Ada)).map(|&a| ctx.layout.run_dir(a)).collect();
    if dirs.len() >= 2 {
        compare(&dirs, &ctx.layout.root, ctx.force)?;
    }
    if let Some(&last) = algs.last() {
        predict(ctx, last)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regime_switch_hysteresis() {
        let path = [0.0, 2.0, 0.5, -0.5, 2.0, -2.0, -0.2, 0.2, -3.0, 3.0];
        assert_eq!(count_regime_switches(&path, 0.0, 1.0), 2);
        assert_eq!(count_regime_switches(&[0.1, -0.1, 0.2], 0.0, 1.0), 0);
    }

    #[test]
    fn high_density_keeps_top_half() {
        let mk = |iter, loglik| ChainRow {
            iter,
            theta: vec![0.0],
            loglik,
            source: "pf".into(),
            stage1_passed: false,
            case: None,
            pf_calls: 1,
            accepted: true,
            branch: "mh".into(),
        };
        let rows = vec![mk(1, -3.0), mk(2, -1.0), mk(3, -2.0), mk(4, -5.0), mk(5, -1.0)];
        let top: Vec<usize> = high_density_rows(&rows).iter().map(|r| r.iter).collect();
        assert_eq!(top, vec![2, 5, 3]);
    }

    #[test]
    fn holdout_takes_every_tenth_row() {
        let pts: Vec<ParameterPoint> = (0..25).map(|i| point(&[i as f64]).unwrap()).collect();
        let data = TrainingDataset::new(pts, (0..25).map(f64::from).collect(), None).unwrap();
        let (train, test) = holdout_split(&data);
        assert_eq!(test.logliks, vec![9.0, 19.0]);
        assert_eq!(train.len(), 23);
    }
}
