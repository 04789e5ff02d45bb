//! Std-side tooling for rectified wire networks: file formats, the exact
//! QP oracle, CSV reports, experiment presets and parallel evaluation.

mod error;
pub mod experiments;
pub mod io;
pub mod oracle;
pub mod parallel;
pub mod report;

pub use error::{Error, Result};
