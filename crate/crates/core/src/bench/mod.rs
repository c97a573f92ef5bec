//! Closed-loop workloads, metrics and reports.

pub mod fit;
pub mod metrics;
pub mod report;
pub mod run;
pub mod workload;
pub mod zipf;

pub use fit::{linear_fit, LinearFit};
pub use metrics::Metrics;
pub use report::{report, ReportFormat};
pub use run::{run_experiment, run_socket, run_with, Experiment};
pub use workload::{KeySpace, WorkloadConfig, WorkloadSource};
pub use zipf::{zipf_next, Zipf};
