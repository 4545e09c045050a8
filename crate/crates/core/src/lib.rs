//! Online upgrade pricing for a ladder of substitutable resources.
//!
//! Modules build bottom-up: [`domain`] holds instances and acceptance
//! curves, [`hybrid`] solves the fluid benchmark, [`policy`] implements the
//! online rules, [`sim`] runs episodes, [`oracle`] computes exact
//! dynamic-programming values and [`experiments`] runs Monte Carlo studies.

pub mod domain;
pub mod error;
pub mod experiments;
pub mod hybrid;
pub mod oracle;
pub mod policy;
pub mod sim;

pub use error::{Error, Result};
