//! Per-ROT latency properties: one-round, one-version, nonblocking, and the
//! number of communication steps.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::transport::trace::{EventKind, TraceEvent};
use crate::transport::{Note, TimerKind};
use crate::types::{NodeId, RotId};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RotProperties {
    pub partitions: u32,
    /// The client sent one message to, and got one message from, each
    /// involved partition, and nothing else happened between partitions.
    pub one_round: bool,
    /// Every partition returned exactly one version (or ⊥) per key asked.
    pub one_version: bool,
    /// Every reply was sent while handling a message of this ROT.
    pub nonblocking: bool,
    /// Longest causal chain of messages ending at the client.
    pub steps: u32,
    /// Longest time any involved partition parked this ROT.
    pub blocked_us: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    pub rots: u64,
    pub one_round: u64,
    pub one_version: u64,
    pub nonblocking: u64,
    /// Number of ROTs per step count.
    pub steps: BTreeMap<u32, u64>,
    pub blocked_rots: u64,
    pub total_blocking_us: u64,
    pub per_rot: BTreeMap<RotId, RotProperties>,
}

#[derive(Default)]
struct Acc {
    to_part: BTreeMap<NodeId, u32>,
    from_part: BTreeMap<NodeId, u32>,
    keys_asked: BTreeMap<NodeId, u32>,
    versions_back: BTreeMap<NodeId, u32>,
    between_parts: u32,
    blocking_replies: u32,
    /// Message depth, by message id.
    depth: BTreeMap<u64, u32>,
    /// Deepest ROT message delivered so far, per node.
    seen: BTreeMap<NodeId, u32>,
    steps: u32,
    blocked: BTreeMap<NodeId, u64>,
    completed: bool,
}

pub fn check_latency(trace: &[TraceEvent]) -> LatencyReport {
    // The event that opened each step.
    let mut opener: BTreeMap<u64, &TraceEvent> = BTreeMap::new();
    for e in trace {
        opener.entry(e.step).or_insert(e);
    }
    let mut parked: BTreeMap<(NodeId, u64), u64> = BTreeMap::new();
    let mut accs: BTreeMap<RotId, Acc> = BTreeMap::new();
    for e in trace {
        match e.kind {
            EventKind::Note => {
                if let Some(Note::Blocked { token, .. }) = &e.note {
                    parked.entry((e.node, *token)).or_insert(e.time);
                }
            }
            EventKind::OpEnd => {
                if let Some(crate::transport::OpDesc::Rot { rot, .. }) = e.op.as_ref().map(|o| &o.desc) {
                    accs.entry(*rot).or_default().completed = true;
                }
            }
            EventKind::MsgSend => {
                let Some(m) = &e.msg else { continue };
                let Some(rot) = m.rot else { continue };
                if !m.kind.is_rot() {
                    continue;
                }
                let a = accs.entry(rot).or_default();
                let d = a.seen.get(&m.src).copied().unwrap_or(0) + 1;
                a.depth.insert(m.id, d);
                match (m.src.is_client(), m.dst.is_client()) {
                    (true, false) => {
                        *a.to_part.entry(m.dst).or_default() += 1;
                        *a.keys_asked.entry(m.dst).or_default() += m.keys;
                    }
                    (false, true) => {
                        *a.from_part.entry(m.src).or_default() += 1;
                        *a.versions_back.entry(m.src).or_default() += m.versions;
                        let open = opener.get(&e.step).copied();
                        let in_rot_message = open.is_some_and(|o| {
                            o.kind == EventKind::MsgDeliver && o.node == m.src && o.msg.as_ref().is_some_and(|om| om.rot == Some(rot))
                        });
                        if !in_rot_message {
                            a.blocking_replies += 1;
                            if let Some(TimerKind::Resume { token }) = open.and_then(|o| o.timer) {
                                if let Some(since) = parked.get(&(m.src, token)) {
                                    let b = a.blocked.entry(m.src).or_default();
                                    *b = (*b).max(e.time - since);
                                }
                            }
                        }
                    }
                    _ => a.between_parts += 1,
                }
            }
            EventKind::MsgDeliver => {
                let Some(m) = &e.msg else { continue };
                let Some(rot) = m.rot else { continue };
                if !m.kind.is_rot() {
                    continue;
                }
                let a = accs.entry(rot).or_default();
                let d = a.depth.get(&m.id).copied().unwrap_or(1);
                let s = a.seen.entry(m.dst).or_default();
                *s = (*s).max(d);
                if m.dst.is_client() {
                    a.steps = a.steps.max(d);
                }
            }
            _ => {}
        }
    }
    let mut r = LatencyReport::default();
    for (rot, a) in accs {
        if !a.completed {
            continue;
        }
        let mut involved: Vec<&NodeId> = a.to_part.keys().chain(a.from_part.keys()).collect();
        involved.sort();
        involved.dedup();
        let one_round = a.between_parts == 0
            && involved.iter().all(|p| a.to_part.get(p) == Some(&1) && a.from_part.get(p) == Some(&1));
        let one_version = involved
            .iter()
            .all(|p| a.keys_asked.get(p).copied().unwrap_or(0) == a.versions_back.get(p).copied().unwrap_or(0));
        let props = RotProperties {
            partitions: involved.len() as u32,
            one_round,
            one_version,
            nonblocking: a.blocking_replies == 0,
            steps: a.steps,
            blocked_us: a.blocked.values().copied().max().unwrap_or(0),
        };
        r.rots += 1;
        r.one_round += u64::from(props.one_round);
        r.one_version += u64::from(props.one_version);
        r.nonblocking += u64::from(props.nonblocking);
        *r.steps.entry(props.steps).or_default() += 1;
        if !props.nonblocking {
            r.blocked_rots += 1;
            r.total_blocking_us += props.blocked_us;
        }
        r.per_rot.insert(rot, props);
    }
    r
}
