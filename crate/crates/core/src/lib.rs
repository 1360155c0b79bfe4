//! One-feature black-box perturbation attacks on prompt-based trajectory and
//! lane-change-intention predictors.

// `!(x > 0.0)` rejects NaN along with non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attack;
pub mod campaign;
pub mod features;
pub mod ingest;
pub mod metrics;
pub mod predictor;
pub mod prompt;
pub mod scenario;
pub mod util;
pub mod vuln;
