//! Datasets, evaluation runs, reports and the `tsplab` command line.

pub mod cli;
pub mod compare;
pub mod config;
pub mod dataset;
pub mod error;
pub mod report;
pub mod solver;

pub use compare::compare;
pub use dataset::{make_dataset, Dataset, DatasetSpec, LabelSource, Law};
pub use error::{Error, Result};
pub use report::{evaluate, EvalOptions, EvalReport};
pub use solver::{solve_instance, CandidateSource, PiSource, SolverConfig};
