//! D-optimal multilevel input design for nonlinear FIR-type systems.
//!
//! A periodic input taking values on a finite grid is summarized by how often
//! each length-`n` subsequence occurs in it. The Fisher information of the
//! input is a convex combination of per-subsequence matrices weighted by those
//! frequencies, so maximizing its determinant is a convex problem over the
//! simplex. [`optimizer::optimize`] solves it with a multiplicative update
//! driven by the dispersion function, either over all subsequences or over
//! the symmetric corner designs of [`symmetric_basis`], which are always
//! realizable. [`realization`] turns the resulting counts into an actual
//! periodic sequence through an Euler circuit of the design's de Bruijn-style
//! multigraph.
//!
//! ```no_run
//! use firdesign::{config::RunConfig, pipeline};
//!
//! let config = RunConfig::from_path("configs/wiener_fir.toml".as_ref()).unwrap();
//! let report = pipeline::run_realize(&config).unwrap();
//! println!("det = {:.4e}", report.det);
//! ```

// `!(x > 0.0)` style checks deliberately reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod design_space;
pub mod error;
pub mod export;
pub mod fisher;
pub mod model;
pub mod optimizer;
pub mod pipeline;
pub mod realization;
pub mod symmetric_basis;

pub use design_space::{AmplitudeGrid, CountVector, FrequencyVector, SubseqSpace};
pub use error::{Error, Result};
pub use fisher::{ElementaryFisherSet, InformationMatrix, InformationSet};
pub use model::ModelSpec;
pub use optimizer::{DesignResult, OptimizerConfig};
