//! Location-dependent marked point processes with spatial regularity.
//!
//! Marks are mapped to pseudo-arrival times, a self-correcting
//! spatio-temporal process is fitted to the ordered locations, a tree
//! ensemble learns the marks from covariates and competition indices, and
//! the fitted model is checked with global envelope tests.

// NaN-rejecting checks are written as negated comparisons on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod check;
pub mod cli;
pub mod envelope;
pub mod error;
pub mod estimation;
pub mod io;
pub mod likelihood;
pub mod marks;
pub mod neighbors;
pub mod pattern;
pub mod plot;
pub mod rng;
pub mod simulation;
pub mod summaries;
pub mod time_mapping;

pub use error::{Error, Result};
