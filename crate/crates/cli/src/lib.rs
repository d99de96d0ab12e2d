//! Pipeline CLI: simulate, harvest, fit, run, compare and predict.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod model;
pub mod report;
