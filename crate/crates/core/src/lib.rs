//! Two-stage customer targeting: estimate per-customer uplift from randomized
//! experiment logs, turn the estimates into a treatment assignment under
//! budget or outcome-floor constraints, and evaluate candidate policies
//! offline against the logged data.
//!
//! | module | role |
//! |---|---|
//! | [`dataset`] | experiment logs, CSV ingestion, validation, splitting |
//! | [`synth`] | synthetic experiments with known ground truth |
//! | [`uplift`] | S/T/X learners, uplift curve, AUC, bucket diagnostics |
//! | [`policy`] | assignment optimizers and brute-force oracles |
//! | [`ope`] | IPS, SNIPS, e%iS, lift tables |
//! | [`pipeline`] | config-driven simulate → fit → optimize → evaluate runs |

pub mod dataset;
pub mod error;
pub mod ope;
pub mod pipeline;
pub mod policy;
pub mod synth;
pub mod uplift;

pub use error::{Error, Result};
