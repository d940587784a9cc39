//! Experiment engine behind the command-line tool: configuration, seeded
//! Monte Carlo sweeps, estimator dispatch and file formats.
//!
//! Every trial derives its random stream from the master seed, the SNR index
//! and the trial index alone, so sweeps give identical tables for any worker
//! count.

pub mod bench;
pub mod config;
pub mod fig1;
pub mod gradcheck;
pub mod io;
pub mod seed;

pub use bench::{run_bench, AggregateRow, BenchReport, Diagnostics, TrialRecord};
pub use config::{EstimatorKind, ExperimentConfig, Link};
pub use fig1::{run_fig1, Fig1Row};
pub use gradcheck::{run_gradcheck, GradcheckReport, GradcheckSettings};
