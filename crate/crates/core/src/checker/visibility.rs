//! Eventual visibility and replica convergence.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::history::{History, OpKind};
use crate::clock::Timestamp;
use crate::storage::VersionId;
use crate::transport::trace::{EventKind, TraceEvent};
use crate::types::{DcId, Key, RotId};

type Lww = Option<(Timestamp, DcId)>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisibilityViolation {
    pub dc: DcId,
    pub version: VersionId,
    /// The last ROT in `dc` that read the key, and what it got.
    pub last_rot: RotId,
    pub last_returned: Option<VersionId>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VisibilityReport {
    pub violations: Vec<VisibilityViolation>,
    /// (version, DC) pairs never read after the write completed.
    pub unobserved: u64,
    /// Measured delay between a PUT returning and the first ROT after which
    /// every ROT in a DC sees it (or something newer).
    pub mean_lag_us: f64,
    pub max_lag_us: u64,
}

struct Read {
    start: u64,
    lww: Lww,
    rot: RotId,
    returned: Option<VersionId>,
}

/// For every written version `X` and every DC with clients, the ROTs in that
/// DC that read `X`'s key after `X`'s PUT returned must eventually all return
/// `X` or an LWW-newer version. The visibility time is the start of the
/// first ROT from which that holds; if the last such ROT still returns
/// something older, `X` never became visible there.
pub fn check_eventual_visibility(h: &History) -> VisibilityReport {
    let mut reads: BTreeMap<(DcId, &Key), Vec<Read>> = BTreeMap::new();
    for op in &h.ops {
        if let (OpKind::Rot { rot, keys, result: Some(r) }, Some(c)) = (&op.kind, op.client) {
            for (k, v) in keys.iter().zip(r) {
                reads.entry((c.dc(), k)).or_default().push(Read {
                    start: op.start,
                    lww: v.as_ref().map(VersionId::lww),
                    rot: *rot,
                    returned: v.clone(),
                });
            }
        }
    }
    // Suffix minimum of returned versions, per (dc, key), in start order.
    let mut suffix: BTreeMap<(DcId, &Key), Vec<Lww>> = BTreeMap::new();
    for (k, rs) in reads.iter_mut() {
        rs.sort_by_key(|r| r.start);
        let mut mins = vec![None; rs.len()];
        let mut acc: Option<Lww> = None;
        for i in (0..rs.len()).rev() {
            let m = match acc {
                None => rs[i].lww,
                Some(a) => a.min(rs[i].lww),
            };
            acc = Some(m);
            mins[i] = m;
        }
        suffix.insert(*k, mins);
    }
    let dcs: Vec<DcId> = {
        let mut d: Vec<DcId> = h.ops.iter().filter_map(|o| o.client.map(|c| c.dc())).collect();
        d.sort_unstable();
        d.dedup();
        d
    };
    let mut report = VisibilityReport::default();
    let mut lag_sum = 0u128;
    let mut lag_n = 0u64;
    for op in &h.ops {
        let (Some(x), Some(done)) = (op.written(), op.end) else {
            continue;
        };
        for &dc in &dcs {
            let Some(rs) = reads.get(&(dc, &x.key)) else {
                report.unobserved += 1;
                continue;
            };
            let lo = rs.partition_point(|r| r.start < done);
            if lo == rs.len() {
                report.unobserved += 1;
                continue;
            }
            let mins = &suffix[&(dc, &x.key)];
            let want: Lww = Some(x.lww());
            let first_ok = lo + mins[lo..].partition_point(|m| *m < want);
            if first_ok == rs.len() {
                let last = rs.last().expect("non-empty");
                report.violations.push(VisibilityViolation {
                    dc,
                    version: x.clone(),
                    last_rot: last.rot,
                    last_returned: last.returned.clone(),
                });
            } else {
                let lag = if first_ok == lo { 0 } else { rs[first_ok].start - done };
                lag_sum += u128::from(lag);
                lag_n += 1;
                report.max_lag_us = report.max_lag_us.max(lag);
            }
        }
    }
    if lag_n > 0 {
        report.mean_lag_us = lag_sum as f64 / lag_n as f64;
    }
    report
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvergenceViolation {
    pub key: Key,
    pub dc: DcId,
    pub found: Option<VersionId>,
    pub expected: VersionId,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    /// False when the trace carries no final replica states.
    pub checked: bool,
    pub violations: Vec<ConvergenceViolation>,
}

/// At the end of the run every DC's replica of a key holds, as its LWW
/// winner, the LWW-greatest version ever written to that key.
pub fn check_convergence(h: &History, trace: &[TraceEvent]) -> ConvergenceReport {
    let mut winners: BTreeMap<DcId, BTreeMap<Key, VersionId>> = BTreeMap::new();
    let mut checked = false;
    for e in trace.iter().filter(|e| e.kind == EventKind::FinalState) {
        checked = true;
        let dc = winners.entry(e.node.dc()).or_default();
        for v in e.state.iter().flatten() {
            let slot = dc.entry(v.key.clone()).or_insert_with(|| v.clone());
            if v.lww() > slot.lww() {
                *slot = v.clone();
            }
        }
    }
    let mut report = ConvergenceReport { checked, violations: Vec::new() };
    if !checked {
        return report;
    }
    let mut expected: BTreeMap<&Key, &VersionId> = BTreeMap::new();
    for v in h.writer.keys() {
        let e = expected.entry(&v.key).or_insert(v);
        if v.lww() > e.lww() {
            *e = v;
        }
    }
    for (dc, held) in &winners {
        for (key, want) in &expected {
            let found = held.get(*key);
            if found != Some(*want) {
                report.violations.push(ConvergenceViolation {
                    key: (*key).clone(),
                    dc: *dc,
                    found: found.cloned(),
                    expected: (*want).clone(),
                });
            }
        }
    }
    report
}
