use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mh::initial_loglik;
use super::{log_ratio, LikelihoodEstimator, ProposalKernel};
use crate::caseselect::{CaseLabel, CaseSelect, SelectionContext};
use crate::error::{Error, Result};
use crate::models::Prior;
use crate::rng::{Purpose, StreamFamily};
use crate::stats::mh_accept;
use crate::surrogate::Surrogate;
use crate::types::{Branch, ChainResult, IterationEvent, LogLikEstimate, LogLikSource, ParameterPoint};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DaConfig {
    pub iterations: usize,
    pub burnin: usize,
    /// Probability of a plain Metropolis-Hastings step instead of delayed acceptance.
    pub beta_mh: f64,
    /// Re-estimate the current state's likelihood in the second stage.
    pub refresh_second_stage: bool,
}

impl Default for DaConfig {
    fn default() -> Self {
        Self { iterations: 1000, burnin: 0, beta_mh: 0.15, refresh_second_stage: true }
    }
}

/// `mh` is used by the plain branch, `wide` by the delayed-acceptance branch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DaKernels {
    pub mh: ProposalKernel,
    pub wide: ProposalKernel,
}

impl DaKernels {
    /// `g̃ = Σ` and `g = a²Σ`.
    pub fn from_base(base: &ProposalKernel, wide_scale: f64) -> Result<Self> {
        Ok(Self { mh: base.clone(), wide: base.widened(wide_scale)? })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SecondStage {
    pub accepted: bool,
    pub pf_called: bool,
}

/// Accelerated second stage for an assumed case.
///
/// `gp_log_ratio` is `ℓ_GP(θ_prev) − ℓ_GP(θ*)`; `pf_log_ratio` is only invoked
/// when the case cannot be decided from the surrogate alone.
pub fn ada_second_stage<F>(case: CaseLabel, u: f64, gp_log_ratio: f64, pf_log_ratio: F) -> Result<SecondStage>
where
    F: FnOnce() -> Result<f64>,
{
    let ln_u = u.ln();
    let late = |f: F| -> Result<SecondStage> {
        let accepted = mh_accept(f()? + gp_log_ratio, u)?;
        Ok(SecondStage { accepted, pf_called: true })
    };
    match case {
        CaseLabel::Case1 if ln_u < gp_log_ratio => Ok(SecondStage { accepted: true, pf_called: false }),
        CaseLabel::Case3 if ln_u > gp_log_ratio => Ok(SecondStage { accepted: false, pf_called: false }),
        CaseLabel::Case4 => Ok(SecondStage { accepted: true, pf_called: false }),
        _ => late(pf_log_ratio),
    }
}

struct State {
    theta: ParameterPoint,
    log_prior: f64,
    ll: LogLikEstimate,
}

struct Driver<'a, E: ?Sized, S: ?Sized> {
    est: &'a E,
    surrogate: &'a S,
    prior: &'a Prior,
    kernels: &'a DaKernels,
    cfg: &'a DaConfig,
    family: &'a StreamFamily,
    selector: Option<&'a dyn CaseSelect>,
}

impl<E: LikelihoodEstimator + ?Sized, S: Surrogate + ?Sized> Driver<'_, E, S> {
    /// The stored estimate for the current state, evaluating it on the refresh
    /// stream if the state was accepted without one.
    fn stored_ll(&self, state: &mut State, r: u64, pf_calls: &mut u32) -> Result<f64> {
        if state.ll.source == LogLikSource::GpDraw {
            state.ll = self.est.log_likelihood(&state.theta, &self.family.pf(r, 1))?;
            *pf_calls += 1;
        }
        Ok(state.ll.value)
    }

    fn mh_step(&self, state: &mut State, r: u64) -> Result<IterationEvent> {
        let mut proposal_rng = self.family.at(Purpose::Proposal, r);
        let mut stage = self.family.at(Purpose::StageDecision, r);
        let star = self.kernels.mh.propose(&state.theta, &mut proposal_rng)?;
        let lp_star = self.prior.eval_log_prior(&star)?;
        let u: f64 = stage.random();
        let mut pf_calls = 0;
        let mut accepted = false;
        if lp_star > f64::NEG_INFINITY {
            let ll_prev = self.stored_ll(state, r, &mut pf_calls)?;
            let ll_star = self.est.log_likelihood(&star, &self.family.pf(r, 0))?;
            pf_calls += 1;
            let ratio = log_ratio(ll_star.value, ll_prev)
                + (lp_star - state.log_prior)
                + self.kernels.mh.log_ratio(&state.theta, &star);
            accepted = mh_accept(ratio, u)?;
            if accepted {
                *state = State { theta: star, log_prior: lp_star, ll: ll_star };
            }
        }
        Ok(IterationEvent { stage1_passed: false, case: None, pf_calls, accepted, branch: Branch::Mh })
    }

    fn da_step(&self, state: &mut State, r: u64) -> Result<IterationEvent> {
        let mut proposal_rng = self.family.at(Purpose::Proposal, r);
        let mut stage = self.family.at(Purpose::StageDecision, r);
        let mut gp_rng = self.family.at(Purpose::GpDraw, r);
        let star = self.kernels.wide.propose(&state.theta, &mut proposal_rng)?;
        let lp_star = self.prior.eval_log_prior(&star)?;
        let u1: f64 = stage.random();
        let mut event =
            IterationEvent { stage1_passed: false, case: None, pf_calls: 0, accepted: false, branch: Branch::Da };
        if lp_star == f64::NEG_INFINITY {
            return Ok(event);
        }
        let gp_star = self.surrogate.draw(&star, &mut gp_rng)?;
        let gp_prev = self.surrogate.draw(&state.theta, &mut gp_rng)?;
        let stage1 = log_ratio(gp_star, gp_prev)
            + (lp_star - state.log_prior)
            + self.kernels.wide.log_ratio(&state.theta, &star);
        if !mh_accept(stage1, u1)? {
            return Ok(event);
        }
        event.stage1_passed = true;
        let u2: f64 = stage.random();
        let gp_log_ratio = log_ratio(gp_prev, gp_star);

        let mut ll_star = None;
        let mut pf_calls = 0;
        let mut pf_ratio = |state: &mut State| -> Result<f64> {
            let ls = self.est.log_likelihood(&star, &self.family.pf(r, 0))?;
            pf_calls += 1;
            let lp = if self.cfg.refresh_second_stage {
                pf_calls += 1;
                state.ll = self.est.log_likelihood(&state.theta, &self.family.pf(r, 1))?;
                state.ll.value
            } else {
                self.stored_ll(state, r, &mut pf_calls)?
            };
            ll_star = Some(ls);
            Ok(log_ratio(ls.value, lp))
        };

        let accepted = match self.selector {
            None => mh_accept(pf_ratio(state)? + gp_log_ratio, u2)?,
            Some(sel) => {
                let ctx = SelectionContext {
                    iteration: r as usize,
                    theta_star: &star,
                    theta_prev: &state.theta,
                    gp_log_ratio: log_ratio(gp_star, gp_prev),
                    gp_star_higher: gp_star > gp_prev,
                };
                let case = sel.select(&ctx, &mut self.family.at(Purpose::CaseSelection, r));
                event.case = Some(case);
                ada_second_stage(case, u2, gp_log_ratio, || pf_ratio(state))?.accepted
            }
        };
        event.pf_calls = pf_calls;
        event.accepted = accepted;
        if accepted {
            let ll = match ll_star {
                Some(ls) => ls,
                None => LogLikEstimate::new(gp_star, LogLikSource::GpDraw)?,
            };
            *state = State { theta: star, log_prior: lp_star, ll };
        }
        Ok(event)
    }

    fn run(&self, start: &ParameterPoint) -> Result<ChainResult> {
        let cfg = self.cfg;
        if !(0.0..=1.0).contains(&cfg.beta_mh) {
            return Err(Error::InvalidParameter(format!("beta_mh {} not in [0,1]", cfg.beta_mh)));
        }
        if cfg.iterations == 0 || cfg.burnin > cfg.iterations {
            return Err(Error::InvalidParameter("need 0 <= burnin <= iterations and iterations > 0".into()));
        }
        let clock = Instant::now();
        let (log_prior, ll) = initial_loglik(self.est, self.prior, start, self.family)?;
        let mut state = State { theta: start.clone(), log_prior, ll };
        let mut chain = ChainResult { burnin: cfg.burnin, ..ChainResult::default() };
        for r in 1..=cfg.iterations as u64 {
            let use_mh = cfg.beta_mh >= 1.0
                || (cfg.beta_mh > 0.0
                    && self.family.at(Purpose::StageDecision, r).substream(1).random::<f64>() < cfg.beta_mh);
            let event = if use_mh { self.mh_step(&mut state, r)? } else { self.da_step(&mut state, r)? };
            chain.events.push(event);
            chain.samples.push(state.theta.clone());
            chain.logliks.push(state.ll);
        }
        chain.wall_time = clock.elapsed().as_secs_f64();
        Ok(chain)
    }
}

/// Delayed-acceptance MCMC with a surrogate first stage.
pub fn run_da<E, S>(
    est: &E,
    surrogate: &S,
    prior: &Prior,
    start: &ParameterPoint,
    kernels: &DaKernels,
    cfg: &DaConfig,
    family: &StreamFamily,
) -> Result<ChainResult>
where
    E: LikelihoodEstimator + ?Sized,
    S: Surrogate + ?Sized,
{
    Driver { est, surrogate, prior, kernels, cfg, family, selector: None }.run(start)
}

/// Accelerated delayed acceptance: the selector guesses which ordering case
/// applies so that some second stages skip the expensive estimate.
#[allow(clippy::too_many_arguments)]
pub fn run_ada<E, S, C>(
    est: &E,
    surrogate: &S,
    selector: &C,
    prior: &Prior,
    start: &ParameterPoint,
    kernels: &DaKernels,
    cfg: &DaConfig,
    family: &StreamFamily,
) -> Result<ChainResult>
where
    E: LikelihoodEstimator + ?Sized,
    S: Surrogate + ?Sized,
    C: CaseSelect,
{
    Driver { est, surrogate, prior, kernels, cfg, family, selector: Some(selector) }.run(start)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decide(case: CaseLabel, u: f64, gp: f64, pf: f64) -> SecondStage {
        ada_second_stage(case, u, gp, || Ok(pf)).unwrap()
    }

    #[test]
    fn case_examples() {
        let s = decide(CaseLabel::Case4, 0.999, -1.0, 5.0);
        assert_eq!(s, SecondStage { accepted: true, pf_called: false });
        let s = decide(CaseLabel::Case1, 0.1, 0.2f64.ln(), 1.0);
        assert_eq!(s, SecondStage { accepted: true, pf_called: false });
        let s = decide(CaseLabel::Case3, 0.9, 0.5f64.ln(), -1.0);
        assert_eq!(s, SecondStage { accepted: false, pf_called: false });
        let s = decide(CaseLabel::Case2, 0.5, 0.3, -0.1);
        assert!(s.pf_called);
    }

    #[test]
    fn provider_not_invoked_when_decided_early() {
        let r = ada_second_stage(CaseLabel::Case4, 0.5, 0.0, || panic!("estimate requested"));
        assert!(r.unwrap().accepted);
    }

    /// Every case whose ordering assumption holds must reproduce the plain
    /// second-stage decision for every `u`.
    #[test]
    fn regions_match_plain_second_stage() {
        let grid: Vec<f64> = (-40..=40).map(|i| i as f64 * 0.1).collect();
        let us: Vec<f64> = (0..200).map(|i| (i as f64 + 0.5) / 200.0).chain([0.0, 1e-300]).collect();
        let mut checked = 0;
        for &gp in &grid {
            for &pf in &grid {
                let gp_star_higher = gp < 0.0;
                let case = CaseLabel::from_orderings(gp_star_higher, pf > 0.0);
                for &u in &us {
                    let plain = mh_accept(pf + gp, u).unwrap();
                    let fast = decide(case, u, gp, pf);
                    assert_eq!(fast.accepted, plain, "case {case:?} u {u} gp {gp} pf {pf}");
                    checked += 1;
                }
            }
        }
        assert!(checked > 1_000_000);
    }
}
