//! Diagnostics computed from chain rows, so that a report can always be
//! recomputed from the chain CSV alone.

use std::collections::BTreeMap;

use adamcmc::stats::{effective_sample_size, mean, quantile, variance};
use adamcmc::ChainResult;
use anyhow::{bail, Result};
use serde::{Deserialize, Serialize};

use crate::artifacts::ChainRow;
use crate::config::Algorithm;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub q025: f64,
    pub q500: f64,
    pub q975: f64,
    pub ess: f64,
}

/// Event-log statistics over post-burn-in rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventStats {
    pub iterations: usize,
    pub acceptance_pct: f64,
    /// DA-branch iterations rejected at stage 1, as a share of DA-branch iterations.
    pub early_rejection_pct: Option<f64>,
    pub mh_branch_pct: f64,
    /// Counts of Case1..Case4 as selected by ADA.
    pub case_counts: BTreeMap<String, u64>,
    pub pf_calls_total: u64,
    /// PF calls made in second stages (DA-branch iterations past stage 1).
    pub pf_calls_stage2: u64,
    /// Second stages reached.
    pub stage2_entries: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub algorithm: Algorithm,
    pub burnin: usize,
    pub total_iterations: usize,
    pub wall_time_s: f64,
    pub sec_per_1000: f64,
    pub min_per_1000: f64,
    pub min_ess: f64,
    pub min_ess_per_sec: f64,
    #[serde(flatten)]
    pub events: EventStats,
    pub posterior: Vec<ParamSummary>,
    /// Settings that must agree for two runs to be comparable.
    pub fingerprint: BTreeMap<String, String>,
}

fn pct(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

pub fn event_stats(rows: &[ChainRow]) -> EventStats {
    let n = rows.len() as u64;
    let da: Vec<&ChainRow> = rows.iter().filter(|r| r.branch == "da").collect();
    let early = da.iter().filter(|r| !r.stage1_passed).count() as u64;
    let mut case_counts: BTreeMap<String, u64> = (1..=4).map(|k| (format!("case{k}"), 0)).collect();
    for r in rows {
        if let Some(c) = r.case {
            *case_counts.entry(format!("case{c}")).or_default() += 1;
        }
    }
    let stage2: Vec<&&ChainRow> = da.iter().filter(|r| r.stage1_passed).collect();
    EventStats {
        iterations: rows.len(),
        acceptance_pct: pct(rows.iter().filter(|r| r.accepted).count() as u64, n),
        early_rejection_pct: (!da.is_empty()).then(|| pct(early, da.len() as u64)),
        mh_branch_pct: pct(n - da.len() as u64, n),
        case_counts,
        pf_calls_total: rows.iter().map(|r| u64::from(r.pf_calls)).sum(),
        pf_calls_stage2: stage2.iter().map(|r| u64::from(r.pf_calls)).sum(),
        stage2_entries: stage2.len() as u64,
    }
}

pub fn posterior_summary(names: &[String], rows: &[ChainRow]) -> Result<Vec<ParamSummary>> {
    if rows.is_empty() {
        bail!("no post-burn-in iterations to summarise");
    }
    names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let xs: Vec<f64> = rows.iter().map(|r| r.theta[j]).collect();
            let ess = if xs.len() >= 10 { effective_sample_size(&xs)? } else { xs.len() as f64 };
            Ok(ParamSummary {
                name: name.clone(),
                mean: mean(&xs),
                sd: if xs.len() > 1 { variance(&xs).sqrt() } else { 0.0 },
                q025: quantile(&xs, 0.025),
                q500: quantile(&xs, 0.5),
                q975: quantile(&xs, 0.975),
                ess,
            })
        })
        .collect()
}

pub fn build_report(
    algorithm: Algorithm,
    names: &[String],
    rows: &[ChainRow],
    burnin: usize,
    wall_time_s: f64,
    fingerprint: BTreeMap<String, String>,
) -> Result<RunReport> {
    let post = &rows[burnin.min(rows.len())..];
    let posterior = posterior_summary(names, post)?;
    let min_ess = posterior.iter().map(|p| p.ess).fold(f64::INFINITY, f64::min);
    let total = rows.len();
    let sec_per_1000 = if total > 0 { wall_time_s * 1000.0 / total as f64 } else { 0.0 };
    Ok(RunReport {
        algorithm,
        burnin,
        total_iterations: total,
        wall_time_s,
        sec_per_1000,
        min_per_1000: sec_per_1000 / 60.0,
        min_ess,
        min_ess_per_sec: if wall_time_s > 0.0 { min_ess / wall_time_s } else { 0.0 },
        events: event_stats(post),
        posterior,
        fingerprint,
    })
}

/// Converts sampler output to the rows written to the chain CSV.
pub fn chain_rows(chain: &ChainResult) -> Vec<ChainRow> {
    chain
        .samples
        .iter()
        .zip(&chain.logliks)
        .zip(&chain.events)
        .enumerate()
        .map(|(i, ((p, ll), e))| ChainRow {
            iter: i + 1,
            theta: p.to_vec(),
            loglik: ll.value,
            source: crate::artifacts::source_str(ll.source).to_string(),
            stage1_passed: e.stage1_passed,
            case: e.case.map(|c| c.number()),
            pf_calls: e.pf_calls,
            accepted: e.accepted,
            branch: e.branch.as_str().to_string(),
        })
        .collect()
}

/// Gaussian-kernel density estimate on an evenly spaced grid, Silverman bandwidth.
pub fn kde(xs: &[f64], grid_points: usize) -> Vec<(f64, f64)> {
    let n = xs.len() as f64;
    let sd = if xs.len() > 1 { variance(xs).sqrt() } else { 0.0 };
    let iqr = quantile(xs, 0.75) - quantile(xs, 0.25);
    let spread = sd.min(iqr / 1.34);
    let spread = if spread > 0.0 {
        spread
    } else if sd > 0.0 {
        sd
    } else {
        1e-3
    };
    let h = 0.9 * spread * n.powf(-0.2);
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min) - 3.0 * h;
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 3.0 * h;
    let norm = 1.0 / (n * h * (2.0 * std::f64::consts::PI).sqrt());
    (0..grid_points)
        .map(|k| {
            let x = lo + (hi - lo) * k as f64 / (grid_points - 1) as f64;
            let dens: f64 = xs.iter().map(|v| (-0.5 * ((x - v) / h).powi(2)).exp()).sum();
            (x, dens * norm)
        })
        .collect()
}

pub fn marginals_csv(names: &[String], rows: &[ChainRow], grid_points: usize) -> String {
    let mut out = String::from("parameter,x,density\n");
    for (j, name) in names.iter().enumerate() {
        let xs: Vec<f64> = rows.iter().map(|r| r.theta[j]).collect();
        if xs.is_empty() {
            continue;
        }
        for (x, d) in kde(&xs, grid_points) {
            out.push_str(&format!("{name},{x},{d}\n"));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub run: String,
    pub algorithm: Algorithm,
    pub wall_time_s: f64,
    pub sec_per_1000: f64,
    pub pf_calls_stage2: u64,
    pub pf_calls_total: u64,
    pub min_ess_per_sec: f64,
    /// Baseline seconds per 1000 iterations over this run's.
    pub speedup: f64,
    /// Baseline second-stage PF calls over this run's.
    pub pf_reduction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub baseline: String,
    pub runs: Vec<CompareRow>,
}

/// Compares runs against the first one; all fingerprints must agree.
pub fn compare(runs: &[(String, RunReport)]) -> Result<CompareReport> {
    if runs.len() < 2 {
        bail!("compare needs at least two run directories, got {}", runs.len());
    }
    let (base_name, base) = &runs[0];
    let mut mismatched = Vec::new();
    for (name, r) in &runs[1..] {
        let keys: std::collections::BTreeSet<&String> = base.fingerprint.keys().chain(r.fingerprint.keys()).collect();
        for k in keys {
            if base.fingerprint.get(k) != r.fingerprint.get(k) {
                mismatched.push(format!(
                    "{k} ({base_name}: {}, {name}: {})",
                    base.fingerprint.get(k).map_or("-", String::as_str),
                    r.fingerprint.get(k).map_or("-", String::as_str)
                ));
            }
        }
    }
    if !mismatched.is_empty() {
        bail!("runs are not comparable; mismatched fields: {}", mismatched.join("; "));
    }
    let ratio = |a: f64, b: f64| if b > 0.0 { a / b } else { f64::INFINITY };
    let rows = runs
        .iter()
        .map(|(name, r)| CompareRow {
            run: name.clone(),
            algorithm: r.algorithm,
            wall_time_s: r.wall_time_s,
            sec_per_1000: r.sec_per_1000,
            pf_calls_stage2: r.events.pf_calls_stage2,
            pf_calls_total: r.events.pf_calls_total,
            min_ess_per_sec: r.min_ess_per_sec,
            speedup: ratio(base.sec_per_1000, r.sec_per_1000),
            pf_reduction: ratio(base.events.pf_calls_stage2 as f64, r.events.pf_calls_stage2 as f64),
        })
        .collect();
    Ok(CompareReport { baseline: base_name.clone(), runs: rows })
}

pub fn compare_csv(report: &CompareReport) -> String {
    let mut out = String::from(
        "run,algorithm,wall_time_s,sec_per_1000,pf_calls_stage2,pf_calls_total,min_ess_per_sec,speedup,pf_reduction\n",
    );
    for r in &report.runs {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.run,
            r.algorithm.as_str(),
            r.wall_time_s,
            r.sec_per_1000,
            r.pf_calls_stage2,
            r.pf_calls_total,
            r.min_ess_per_sec,
            r.speedup,
            r.pf_reduction
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(branch: &str, stage1: bool, case: Option<u8>, pf: u32, acc: bool) -> ChainRow {
        ChainRow {
            iter: 0,
            theta: vec![0.0],
            loglik: 0.0,
            source: "pf".into(),
            stage1_passed: stage1,
            case,
            pf_calls: pf,
            accepted: acc,
            branch: branch.into(),
        }
    }

    #[test]
    fn event_percentages() {
        let rows = vec![
            row("mh", false, None, 1, true),
            row("da", false, None, 0, false),
            row("da", false, None, 0, false),
            row("da", true, Some(2), 2, true),
            row("da", true, Some(4), 0, true),
        ];
        let s = event_stats(&rows);
        assert_eq!(s.acceptance_pct, 60.0);
        assert_eq!(s.early_rejection_pct, Some(50.0));
        assert_eq!(s.mh_branch_pct, 20.0);
        assert_eq!(s.pf_calls_total, 3);
        assert_eq!(s.pf_calls_stage2, 2);
        assert_eq!(s.stage2_entries, 2);
        assert_eq!(s.case_counts["case2"], 1);
        assert_eq!(s.case_counts["case1"], 0);
    }

    #[test]
    fn kde_integrates_to_one() {
        let xs: Vec<f64> = (0..500).map(|i| ((i * 37) % 101) as f64 / 10.0).collect();
        let grid = kde(&xs, 400);
        let dx = grid[1].0 - grid[0].0;
        let area: f64 = grid.iter().map(|(_, d)| d * dx).sum();
        assert!((area - 1.0).abs() < 0.01, "{area}");
    }

    #[test]
    fn compare_identical_runs() {
        let events = event_stats(&[row("da", true, None, 2, true)]);
        let r = RunReport {
            algorithm: Algorithm::Da,
            burnin: 0,
            total_iterations: 1,
            wall_time_s: 2.0,
            sec_per_1000: 2000.0,
            min_per_1000: 2000.0 / 60.0,
            min_ess: 1.0,
            min_ess_per_sec: 0.5,
            events,
            posterior: vec![],
            fingerprint: BTreeMap::from([("model".to_string(), "toy".to_string())]),
        };
        let c = compare(&[("a".into(), r.clone()), ("b".into(), r.clone())]).unwrap();
        assert_eq!(c.runs[1].speedup, 1.0);
        assert_eq!(c.runs[1].pf_reduction, 1.0);
        assert!(compare(&[("a".into(), r.clone())]).is_err());
        let mut other = r.clone();
        other.fingerprint.insert("model".into(), "ricker".into());
        let err = compare(&[("a".into(), r), ("b".into(), other)]).unwrap_err().to_string();
        assert!(err.contains("model"), "{err}");
    }
}
