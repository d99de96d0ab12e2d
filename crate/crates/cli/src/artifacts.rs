//! File layout of a pipeline directory and readers/writers for its artifacts.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use adamcmc::caseselect::CaseSelector;
use adamcmc::surrogate::GpModelSpec;
use adamcmc::{Branch, LogLikSource, ParameterPoint, ProposalKernel};
use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::{Algorithm, ModelKind};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Paths inside an output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn data_csv(&self) -> PathBuf {
        self.root.join("data.csv")
    }

    pub fn data_json(&self) -> PathBuf {
        self.root.join("data.json")
    }

    pub fn harvest_dir(&self) -> PathBuf {
        self.root.join("harvest")
    }

    pub fn training_csv(&self) -> PathBuf {
        self.harvest_dir().join("training.csv")
    }

    pub fn aligned_csv(&self) -> PathBuf {
        self.harvest_dir().join("chain_aligned.csv")
    }

    pub fn harvest_json(&self) -> PathBuf {
        self.harvest_dir().join("harvest.json")
    }

    pub fn harvest_chain(&self) -> PathBuf {
        self.harvest_dir().join("chain.csv")
    }

    pub fn fit_dir(&self) -> PathBuf {
        self.root.join("fit")
    }

    pub fn model_json(&self) -> PathBuf {
        self.fit_dir().join("model.json")
    }

    pub fn fit_report(&self) -> PathBuf {
        self.fit_dir().join("fit_report.json")
    }

    pub fn run_dir(&self, alg: Algorithm) -> PathBuf {
        self.root.join("runs").join(alg.as_str())
    }

    pub fn predict_dir(&self) -> PathBuf {
        self.root.join("predict")
    }
}

pub fn chain_csv(run_dir: &Path) -> PathBuf {
    run_dir.join("chain.csv")
}

pub fn report_json(run_dir: &Path) -> PathBuf {
    run_dir.join("report.json")
}

pub fn marginals_csv(run_dir: &Path) -> PathBuf {
    run_dir.join("marginals.csv")
}

/// Fails if any target exists and `force` is off.
pub fn ensure_writable(paths: &[PathBuf], force: bool) -> Result<()> {
    if force {
        return Ok(());
    }
    let existing: Vec<String> = paths.iter().filter(|p| p.exists()).map(|p| p.display().to_string()).collect();
    if !existing.is_empty() {
        bail!("refusing to overwrite {} (use --force)", existing.join(", "));
    }
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes())?;
    w.flush()?;
    Ok(())
}

/// Provenance of `data.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSidecar {
    pub model: ModelKind,
    pub theta: Vec<f64>,
    pub x0: f64,
    pub seed: u64,
    pub length: usize,
    /// `simulated`, or the path the observations were ingested from.
    pub source: String,
}

/// Everything the DA/ADA runs need from the harvest besides the training rows.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HarvestSummary {
    pub model: ModelKind,
    pub param_names: Vec<String>,
    pub kernel: ProposalKernel,
    pub final_state: Vec<f64>,
    pub rows: usize,
    pub acceptance_pct: f64,
    pub acceptance_last_1000_pct: f64,
    pub wall_time_s: f64,
    pub pf_calls: u64,
    pub warnings: Vec<String>,
}

/// Versioned container for the fitted surrogate and case selector.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub model: ModelKind,
    pub param_names: Vec<String>,
    pub gp: GpModelSpec,
    pub selector: CaseSelector,
}

impl ModelFile {
    pub fn load(path: &Path) -> Result<Self> {
        let m: Self = read_json(path)?;
        if m.format_version != MODEL_FORMAT_VERSION {
            bail!("{} has format version {}, expected {MODEL_FORMAT_VERSION}", path.display(), m.format_version);
        }
        Ok(m)
    }
}

pub fn write_points_csv(path: &Path, names: &[String], points: &[ParameterPoint], logliks: &[f64]) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "{},loglik", names.join(","))?;
    for (p, ll) in points.iter().zip(logliks) {
        for v in p.as_slice() {
            write!(w, "{v},")?;
        }
        writeln!(w, "{ll}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_points_csv(path: &Path) -> Result<(Vec<String>, Vec<ParameterPoint>, Vec<f64>)> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let headers = rdr.headers()?.clone();
    let d = headers.len().checked_sub(1).filter(|d| *d > 0).context("points file needs parameter columns")?;
    let names = headers.iter().take(d).map(String::from).collect();
    let mut points = Vec::new();
    let mut logliks = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let vals: Vec<f64> = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .with_context(|| format!("{} row {}", path.display(), i + 1))?;
        points.push(ParameterPoint::new(vals[..d].to_vec())?);
        logliks.push(vals[d]);
    }
    Ok((names, points, logliks))
}

/// One row of a chain CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainRow {
    pub iter: usize,
    pub theta: Vec<f64>,
    pub loglik: f64,
    pub source: String,
    pub stage1_passed: bool,
    pub case: Option<u8>,
    pub pf_calls: u32,
    pub accepted: bool,
    pub branch: String,
}

pub fn source_str(s: LogLikSource) -> &'static str {
    match s {
        LogLikSource::ParticleFilter => "pf",
        LogLikSource::GpDraw => "gp",
        LogLikSource::Exact => "exact",
    }
}

pub fn write_chain_csv(path: &Path, names: &[String], rows: &[ChainRow]) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "iter,{},loglik,loglik_source,stage1_passed,case,pf_calls,accepted,branch", names.join(","))?;
    for r in rows {
        write!(w, "{}", r.iter)?;
        for v in &r.theta {
            write!(w, ",{v}")?;
        }
        let case = r.case.map(|c| c.to_string()).unwrap_or_default();
        writeln!(
            w,
            ",{},{},{},{},{},{},{}",
            r.loglik,
            r.source,
            u8::from(r.stage1_passed),
            case,
            r.pf_calls,
            u8::from(r.accepted),
            r.branch
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_chain_csv(path: &Path) -> Result<(Vec<String>, Vec<ChainRow>)> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let headers = rdr.headers()?.clone();
    if headers.len() < 9 || headers.get(0) != Some("iter") {
        bail!("{} is not a chain file", path.display());
    }
    let d = headers.len() - 8;
    let names: Vec<String> = headers.iter().skip(1).take(d).map(String::from).collect();
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let ctx = || format!("{} row {}", path.display(), i + 1);
        let num = |k: usize| rec[k].parse::<f64>().with_context(ctx);
        let flag = |k: usize| -> Result<bool> {
            match &rec[k] {
                "1" => Ok(true),
                "0" => Ok(false),
                other => bail!("{}: bad flag {other:?}", ctx()),
            }
        };
        let theta = (1..=d).map(num).collect::<Result<Vec<_>>>()?;
        rows.push(ChainRow {
            iter: rec[0].parse().with_context(ctx)?,
            theta,
            loglik: num(d + 1)?,
            source: rec[d + 2].to_string(),
            stage1_passed: flag(d + 3)?,
            case: if rec[d + 4].is_empty() { None } else { Some(rec[d + 4].parse().with_context(ctx)?) },
            pf_calls: rec[d + 5].parse().with_context(ctx)?,
            accepted: flag(d + 6)?,
            branch: rec[d + 7].to_string(),
        });
    }
    Ok((names, rows))
}

impl ChainRow {
    pub fn branch(&self) -> Branch {
        if self.branch == "da" {
            Branch::Da
        } else {
            Branch::Mh
        }
    }
}
