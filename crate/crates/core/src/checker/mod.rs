//! Offline analysis of run traces.
//!
//! The checker rebuilds the client-visible history from a trace and checks
//! it against the definitions directly, independent of any engine:
//! causally consistent snapshots ([`snapshot`]), eventual visibility and
//! convergence ([`visibility`]), and per-ROT latency properties
//! ([`latency`]). It is a pure function of the trace.

pub mod graph;
pub mod history;
pub mod latency;
pub mod snapshot;
pub mod visibility;

use serde::{Deserialize, Serialize};

pub use graph::CausalityGraph;
pub use history::History;
pub use latency::{check_latency, LatencyReport};
pub use snapshot::{check_snapshots, SnapshotViolation};
pub use visibility::{check_convergence, check_eventual_visibility, ConvergenceReport, VisibilityReport};

use crate::transport::TraceEvent;
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub operations: u64,
    pub pending_operations: u64,
    pub snapshot_violations: Vec<SnapshotViolation>,
    pub visibility: VisibilityReport,
    pub convergence: ConvergenceReport,
    pub latency: LatencyReport,
}

impl CheckReport {
    pub fn snapshots_ok(&self) -> bool {
        self.snapshot_violations.is_empty()
    }

    pub fn visibility_ok(&self) -> bool {
        self.visibility.violations.is_empty()
    }

    pub fn convergence_ok(&self) -> bool {
        self.convergence.violations.is_empty()
    }

    /// Safety and liveness checks all passed.
    pub fn passed(&self) -> bool {
        self.snapshots_ok() && self.visibility_ok() && self.convergence_ok() && self.pending_operations == 0
    }

    /// A few lines for terminals.
    pub fn summary(&self) -> String {
        let l = &self.latency;
        let steps: Vec<String> = l.steps.iter().map(|(s, n)| format!("{s}:{n}")).collect();
        format!(
            "operations          {} ({} pending)\n\
             snapshot violations {}\n\
             visibility          {} violations, {} unobserved, lag mean {:.0} us max {} us\n\
             convergence         {} violations\n\
             ROTs                {} total, {} one-round, {} one-version, {} nonblocking\n\
             steps               {}\n\
             blocking            {} ROTs, {} us total\n\
             verdict             {}",
            self.operations,
            self.pending_operations,
            self.snapshot_violations.len(),
            self.visibility.violations.len(),
            self.visibility.unobserved,
            self.visibility.mean_lag_us,
            self.visibility.max_lag_us,
            self.convergence.violations.len(),
            l.rots,
            l.one_round,
            l.one_version,
            l.nonblocking,
            steps.join(" "),
            l.blocked_rots,
            l.total_blocking_us,
            if self.passed() { "pass" } else { "FAIL" },
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub fn check(trace: &[TraceEvent]) -> Result<CheckReport> {
    let h = History::from_trace(trace)?;
    let g = CausalityGraph::build(&h)?;
    Ok(CheckReport {
        operations: h.ops.len() as u64,
        pending_operations: h.pending() as u64,
        snapshot_violations: check_snapshots(&h, &g),
        visibility: check_eventual_visibility(&h),
        convergence: check_convergence(&h, trace),
        latency: check_latency(trace),
    })
}
