use std::time::Instant;

use rand::Rng;

use super::{log_ratio, AmConfig, AmState, LikelihoodEstimator, ProposalKernel};
use crate::error::{Error, Result};
use crate::models::Prior;
use crate::rng::{Purpose, StreamFamily};
use crate::stats::mh_accept;
use crate::surrogate::{ChainAligned, TrainingDataset};
use crate::types::{Branch, ChainResult, IterationEvent, LogLikEstimate, ParameterPoint};

#[derive(Debug, Clone)]
pub struct McmcConfig {
    /// Total iterations including burn-in.
    pub iterations: usize,
    pub burnin: usize,
    pub adapt: bool,
    pub am: AmConfig,
}

#[derive(Debug, Clone)]
pub struct McmcOutput {
    pub chain: ChainResult,
    /// Proposal kernel after the final iteration.
    pub kernel: ProposalKernel,
    /// Post-burn-in proposals (MCWM harvest only).
    pub training: Option<TrainingDataset>,
}

pub(crate) fn initial_loglik<E: LikelihoodEstimator + ?Sized>(
    est: &E,
    prior: &Prior,
    start: &ParameterPoint,
    family: &StreamFamily,
) -> Result<(f64, LogLikEstimate)> {
    let lp = prior.eval_log_prior(start)?;
    if lp == f64::NEG_INFINITY {
        return Err(Error::BadStartingPoint);
    }
    let ll = est.log_likelihood(start, &family.pf(0, 0))?;
    if ll.is_impossible() {
        return Err(Error::BadStartingPoint);
    }
    Ok((lp, ll))
}

fn check_config(cfg: &McmcConfig) -> Result<()> {
    if cfg.iterations == 0 {
        return Err(Error::InvalidParameter("iterations must be positive".into()));
    }
    if cfg.burnin > cfg.iterations {
        return Err(Error::InvalidParameter("burn-in exceeds the number of iterations".into()));
    }
    Ok(())
}

/// Shared PMCMC/MCWM loop. `refresh` re-estimates the current state every iteration.
#[allow(clippy::too_many_arguments)]
fn run_mh<E: LikelihoodEstimator + ?Sized>(
    est: &E,
    prior: &Prior,
    start: &ParameterPoint,
    kernel: &ProposalKernel,
    cfg: &McmcConfig,
    family: &StreamFamily,
    refresh: bool,
    harvest: bool,
) -> Result<McmcOutput> {
    check_config(cfg)?;
    let clock = Instant::now();
    let mut am = AmState::new(kernel, cfg.am.clone())?;
    if !cfg.adapt {
        am.freeze();
    }
    let (mut lp, mut ll) = initial_loglik(est, prior, start, family)?;
    let mut theta = start.clone();
    let mut chain = ChainResult { burnin: cfg.burnin, ..ChainResult::default() };
    let mut rows = Vec::new();
    let mut aligned = ChainAligned { states: Vec::new(), logliks: Vec::new() };
    let mut rows_ll = Vec::new();
    let mut current_kernel = am.kernel()?;

    for r in 1..=cfg.iterations {
        let mut proposal_rng = family.at(Purpose::Proposal, r as u64);
        let mut stage = family.at(Purpose::StageDecision, r as u64);
        let star = current_kernel.propose(&theta, &mut proposal_rng)?;
        let lp_star = prior.eval_log_prior(&star)?;
        let record = harvest && r > cfg.burnin;
        let mut pf_calls = 0;

        if refresh {
            ll = est.log_likelihood(&theta, &family.pf(r as u64, 1))?;
            pf_calls += 1;
        }
        let ll_star = if lp_star > f64::NEG_INFINITY || record {
            pf_calls += 1;
            Some(est.log_likelihood(&star, &family.pf(r as u64, 0))?)
        } else {
            None
        };
        if record {
            let v = ll_star.expect("harvest always evaluates");
            rows.push(star.clone());
            rows_ll.push(v.value);
            aligned.states.push(theta.clone());
            aligned.logliks.push(ll.value);
        }

        let u: f64 = stage.random();
        let accepted = match ll_star {
            Some(ls) if lp_star > f64::NEG_INFINITY => {
                let ratio = log_ratio(ls.value, ll.value) + (lp_star - lp) + current_kernel.log_ratio(&theta, &star);
                let ok = mh_accept(ratio, u)?;
                if ok {
                    theta = star;
                    lp = lp_star;
                    ll = ls;
                }
                ok
            }
            _ => false,
        };
        chain.events.push(IterationEvent { stage1_passed: false, case: None, pf_calls, accepted, branch: Branch::Mh });
        chain.samples.push(theta.clone());
        chain.logliks.push(ll);
        if cfg.adapt {
            am.am_adapt(accepted, theta.as_slice());
            current_kernel = am.kernel()?;
        }
    }
    chain.wall_time = clock.elapsed().as_secs_f64();
    let training = if harvest { Some(TrainingDataset::new(rows, rows_ll, Some(aligned))?) } else { None };
    Ok(McmcOutput { chain, kernel: current_kernel, training })
}

/// Pseudo-marginal Metropolis-Hastings: the current state's estimate is reused.
pub fn run_pmcmc<E: LikelihoodEstimator + ?Sized>(
    est: &E,
    prior: &Prior,
    start: &ParameterPoint,
    kernel: &ProposalKernel,
    cfg: &McmcConfig,
    family: &StreamFamily,
) -> Result<McmcOutput> {
    run_mh(est, prior, start, kernel, cfg, family, false, false)
}

/// Monte Carlo within Metropolis: both estimates are redrawn every iteration.
///
/// With `harvest`, every post-burn-in proposal is recorded with its estimate,
/// together with the chain state and refreshed estimate it was compared against.
pub fn run_mcwm<E: LikelihoodEstimator + ?Sized>(
    est: &E,
    prior: &Prior,
    start: &ParameterPoint,
    kernel: &ProposalKernel,
    cfg: &McmcConfig,
    family: &StreamFamily,
    harvest: bool,
) -> Result<McmcOutput> {
    run_mh(est, prior, start, kernel, cfg, family, true, harvest)
}
