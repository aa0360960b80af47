//! Sequence-based filtering on top of single-frame visual place recognition.
//!
//! The crate is organised the way an evaluation run flows:
//!
//! - [`dataset`]: traverses, ground truth, synthetic descriptor datasets
//! - [`descriptor`]: whole-image HOG and `SVPR1` descriptor import/export
//! - [`matcher`]: similarity matrices and aligned sequence matching
//! - [`metrics`]: precision/recall, PR-AUC, precision at 100% recall, PCU
//! - [`harness`]: experiment sweeps over techniques, datasets and sequence
//!   lengths, with CSV/JSON/SVG reports

pub mod dataset;
pub mod descriptor;
pub mod error;
pub mod harness;
pub mod matcher;
pub mod metrics;

pub use error::{Error, Result};
