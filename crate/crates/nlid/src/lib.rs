//! Experiments for nonlocal diffusion parameter identification: the four
//! data sets, fine-mesh surrogates, identification runs, convergence tables,
//! result files and multi-threaded assembly.
//!
//! The numerics live in [`nlid_core`].

pub mod datasets;
pub mod error;
pub mod experiments;
pub mod parallel;
pub mod results;
pub mod surrogate;

pub use datasets::{Case, CaseSpec};
pub use error::{AppError, AppResult};
pub use experiments::{convergence_table, run_identification, ConvergenceRow, Experiment, Identification, RunSettings};
