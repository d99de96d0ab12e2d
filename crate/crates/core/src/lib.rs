//! Delayed-acceptance and accelerated delayed-acceptance MCMC with Gaussian
//! process surrogates of particle-filter log-likelihoods.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod caseselect;
pub mod error;
pub mod models;
pub mod rng;
pub mod samplers;
pub mod smc;
pub mod stats;
pub mod surrogate;
pub mod types;

pub use caseselect::{CaseLabel, CaseSelect, CaseSelector, SelectorKind};
pub use error::{Error, Result};
pub use models::{Prior, TimeSeries};
pub use rng::{Purpose, RngStream, StreamFamily};
pub use samplers::{DaConfig, DaKernels, LikelihoodEstimator, McmcConfig, ProposalKernel};
pub use smc::{ParticleLikelihood, PfConfig, StateSpaceModel};
pub use surrogate::{GpModel, Surrogate, TrainingDataset};
pub use types::{Branch, ChainResult, IterationEvent, LogLikEstimate, LogLikSource, ParameterPoint};
