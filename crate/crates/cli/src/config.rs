//! Run configuration: per-model defaults overlaid with a user TOML file.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use adamcmc::caseselect::SelectorKind;
use adamcmc::models::dwp::{DEFAULT_SUBSTEPS, DWP_A, DWP_G, DWP_THETA_TRUE};
use adamcmc::models::ricker::{RICKER_THETA_TRUE, RICKER_X0};
use adamcmc::models::{dwp_prior, dwp_start, ricker_prior, PriorComponent, RICKER_START};
use adamcmc::smc::Resampling;
use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Ricker,
    DwpSde,
    Toy,
}

impl FromStr for ModelKind {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ricker" => Ok(ModelKind::Ricker),
            "dwp-sde" | "dwp" => Ok(ModelKind::DwpSde),
            "toy" => Ok(ModelKind::Toy),
            other => bail!("unknown model {other:?} (expected ricker, dwp-sde or toy)"),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Ricker => "ricker",
            ModelKind::DwpSde => "dwp-sde",
            ModelKind::Toy => "toy",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Pmcmc,
    Mcwm,
    Da,
    Ada,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Pmcmc => "pmcmc",
            Algorithm::Mcwm => "mcwm",
            Algorithm::Da => "da",
            Algorithm::Ada => "ada",
        }
    }
}

impl FromStr for Algorithm {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pmcmc" => Ok(Algorithm::Pmcmc),
            "mcwm" => Ok(Algorithm::Mcwm),
            "da" => Ok(Algorithm::Da),
            "ada" => Ok(Algorithm::Ada),
            other => bail!("unknown algorithm {other:?} (expected pmcmc, mcwm, da or ada)"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub length: usize,
    /// Log-scale parameters used to simulate; model truth when absent.
    pub theta: Vec<f64>,
    pub x0: f64,
    /// Observations to ingest instead of the simulated `data.csv`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DwpConfig {
    pub a: f64,
    pub g: f64,
    pub substeps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PfSection {
    pub particles: usize,
    pub replicates: usize,
    pub resampling: Resampling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarvestConfig {
    /// Total MCWM iterations including burn-in; post-burn-in proposals are harvested.
    pub iterations: usize,
    pub burnin: usize,
    pub target_acceptance: f64,
    pub adapt_start: usize,
    pub initial_sd: f64,
    pub start: Vec<f64>,
    /// Plain pseudo-marginal iterations run before MCWM to settle the chain.
    pub pilot_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub trim_fraction: f64,
    pub selector: SelectorKind,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub max_opt_rows: usize,
    pub restarts: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rmse_warning: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// PMCMC / MCWM iterations including burn-in.
    pub iterations: usize,
    pub burnin: usize,
    pub target_acceptance: f64,
    pub initial_sd: f64,
    pub start: Vec<f64>,
    /// DA / ADA iterations; these chains start where the harvest ended.
    pub da_iterations: usize,
    pub da_burnin: usize,
    pub beta_mh: f64,
    pub wide_scale: f64,
    pub refresh_second_stage: bool,
    /// PMCMC burn-in runs with a refreshed current estimate (MCWM) so a lucky
    /// estimate far from the posterior cannot freeze the chain.
    pub pmcmc_warmup_refresh: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictConfig {
    pub draws: usize,
    pub bins: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineSection {
    pub algorithms: Vec<Algorithm>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub model: ModelKind,
    pub seed: u64,
    pub prior: Vec<PriorComponent>,
    pub data: DataConfig,
    pub dwp: DwpConfig,
    pub pf: PfSection,
    pub harvest: HarvestConfig,
    pub fit: FitConfig,
    pub run: RunConfig,
    pub predict: PredictConfig,
    pub pipeline: PipelineSection,
}

impl PipelineConfig {
    pub fn defaults(model: ModelKind) -> Self {
        let dwp = DwpConfig { a: DWP_A, g: DWP_G, substeps: DEFAULT_SUBSTEPS };
        let fit = FitConfig {
            trim_fraction: 0.10,
            selector: SelectorKind::Tree,
            max_depth: 6,
            min_leaf: 10,
            max_opt_rows: 400,
            restarts: 2,
            rmse_warning: None,
        };
        let predict = PredictConfig { draws: 100, bins: 40 };
        let pipeline = PipelineSection { algorithms: vec![Algorithm::Da, Algorithm::Ada] };
        match model {
            ModelKind::Ricker => Self {
                model,
                seed: 2,
                prior: ricker_prior().components().to_vec(),
                data: DataConfig { length: 50, theta: RICKER_THETA_TRUE.to_vec(), x0: RICKER_X0, path: None },
                dwp,
                pf: PfSection { particles: 1000, replicates: 1, resampling: Resampling::Systematic },
                harvest: HarvestConfig {
                    iterations: 4000,
                    burnin: 2000,
                    target_acceptance: 0.40,
                    adapt_start: 200,
                    initial_sd: 0.1,
                    start: RICKER_START.to_vec(),
                    pilot_iterations: 0,
                },
                fit,
                run: RunConfig {
                    iterations: 52_000,
                    burnin: 2000,
                    target_acceptance: 0.40,
                    initial_sd: 0.1,
                    start: RICKER_START.to_vec(),
                    da_iterations: 50_000,
                    da_burnin: 0,
                    beta_mh: 0.15,
                    wide_scale: 1.25,
                    refresh_second_stage: true,
                    pmcmc_warmup_refresh: true,
                },
                predict,
                pipeline,
            },
            ModelKind::DwpSde => Self {
                model,
                seed: 2,
                prior: dwp_prior().components().to_vec(),
                data: DataConfig {
                    length: 2000,
                    theta: DWP_THETA_TRUE.to_vec(),
                    x0: DWP_THETA_TRUE[2].exp(),
                    path: None,
                },
                dwp,
                pf: PfSection { particles: 250, replicates: 4, resampling: Resampling::Systematic },
                harvest: HarvestConfig {
                    iterations: 15_000,
                    burnin: 10_000,
                    target_acceptance: 0.15,
                    adapt_start: 200,
                    initial_sd: 0.02,
                    start: dwp_start().to_vec(),
                    pilot_iterations: 0,
                },
                fit,
                run: RunConfig {
                    iterations: 20_000,
                    burnin: 10_000,
                    target_acceptance: 0.15,
                    initial_sd: 0.02,
                    start: dwp_start().to_vec(),
                    da_iterations: 10_000,
                    da_burnin: 0,
                    beta_mh: 0.15,
                    wide_scale: 1.25,
                    refresh_second_stage: true,
                    pmcmc_warmup_refresh: true,
                },
                predict,
                pipeline,
            },
            ModelKind::Toy => Self {
                model,
                seed: 2,
                prior: vec![PriorComponent::Normal { mean: 0.0, sd: 5.0 }],
                data: DataConfig { length: 100, theta: vec![1.5], x0: 0.0, path: None },
                dwp,
                pf: PfSection { particles: 200, replicates: 1, resampling: Resampling::Systematic },
                harvest: HarvestConfig {
                    iterations: 1500,
                    burnin: 500,
                    target_acceptance: 0.40,
                    adapt_start: 100,
                    initial_sd: 0.2,
                    start: vec![0.0],
                    pilot_iterations: 0,
                },
                fit,
                run: RunConfig {
                    iterations: 5000,
                    burnin: 500,
                    target_acceptance: 0.40,
                    initial_sd: 0.2,
                    start: vec![0.0],
                    da_iterations: 3000,
                    da_burnin: 0,
                    beta_mh: 0.15,
                    wide_scale: 1.25,
                    refresh_second_stage: true,
                    pmcmc_warmup_refresh: true,
                },
                predict,
                pipeline,
            },
        }
    }

    /// Parses a TOML document, filling anything it leaves out from the
    /// defaults of its `model` (Ricker when absent).
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let user: toml::Table = toml::from_str(text).context("parsing configuration")?;
        let model = match user.get("model") {
            Some(v) => v.as_str().context("`model` must be a string")?.parse()?,
            None => ModelKind::Ricker,
        };
        let mut base = toml::Table::try_from(Self::defaults(model)).context("serialising defaults")?;
        merge(&mut base, user);
        let cfg: Self = toml::Value::Table(base).try_into().context("invalid configuration")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml_str(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn dim(&self) -> usize {
        match self.model {
            ModelKind::Ricker => 3,
            ModelKind::DwpSde => 7,
            ModelKind::Toy => 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        for (name, v) in [
            ("prior", self.prior.len()),
            ("data.theta", self.data.theta.len()),
            ("harvest.start", self.harvest.start.len()),
            ("run.start", self.run.start.len()),
        ] {
            if v != d {
                bail!("{name} has {v} entries but the {} model has {d} parameters", self.model);
            }
        }
        if self.data.length == 0 {
            bail!("data.length must be positive");
        }
        if self.harvest.burnin > self.harvest.iterations || self.run.burnin > self.run.iterations {
            bail!("burnin exceeds iterations");
        }
        if !(0.0..=1.0).contains(&self.run.beta_mh) {
            bail!("run.beta_mh must be in [0, 1]");
        }
        if !(self.run.wide_scale > 0.0) {
            bail!("run.wide_scale must be positive");
        }
        if self.pf.particles == 0 || self.pf.replicates == 0 {
            bail!("pf.particles and pf.replicates must be positive");
        }
        Ok(())
    }
}

fn merge(base: &mut toml::Table, user: toml::Table) {
    for (k, v) in user {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(u)) => merge(b, u),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}
