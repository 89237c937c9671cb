//! Label-efficient selection from an enumerable family of item sets:
//! action elimination for classification, and active FDR control.

pub mod confidence;
pub mod elim;
pub mod error;
pub mod family;
pub mod fdrctl;
pub mod harness;
pub mod instance;
pub mod metrics;
pub mod sampling;
pub mod trace;

pub use error::{Error, Result};
