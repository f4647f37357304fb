//! Localized boosting over weakly labeled data.
//!
//! Base learners are fitted on error-guided neighborhoods of a weakly labeled
//! set, gated by a learned source-conditional distribution, and weighted by
//! estimates on weak labels that are then corrected on a small clean set.

pub mod boost;
pub mod condfn;
pub mod datamodel;
pub mod error;
pub mod harness;
pub mod learner;
pub mod localize;
pub mod metrics;
pub mod nn;
pub mod par;
pub mod seeds;
pub mod weaksource;
pub mod weighting;

pub use error::{Error, Result};
