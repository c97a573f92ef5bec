//! Client operations reconstructed from a trace.

use std::collections::BTreeMap;

use crate::storage::VersionId;
use crate::transport::trace::{EventKind, OpDesc, TraceEvent};
use crate::transport::Note;
use crate::types::{Key, NodeId, RotId};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OpKind {
    /// A write; `version` is known once the PUT returned.
    Put { key: Key, version: Option<VersionId> },
    Rot { rot: RotId, keys: Vec<Key>, result: Option<Vec<Option<VersionId>>> },
    /// A version that existed before the run started.
    Preload { version: VersionId },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Operation {
    /// `None` for preloaded versions.
    pub client: Option<NodeId>,
    pub seq: u64,
    pub start: u64,
    pub end: Option<u64>,
    pub kind: OpKind,
}

impl Operation {
    pub fn written(&self) -> Option<&VersionId> {
        match &self.kind {
            OpKind::Put { version, .. } => version.as_ref(),
            OpKind::Preload { version } => Some(version),
            OpKind::Rot { .. } => None,
        }
    }
}

/// All operations of a trace, preloads first, then in start order.
#[derive(Debug, Clone, Default)]
pub struct History {
    pub ops: Vec<Operation>,
    /// Version id to the index of the operation that wrote it.
    pub writer: BTreeMap<VersionId, usize>,
}

impl History {
    pub fn from_trace(trace: &[TraceEvent]) -> Result<Self> {
        let mut ops = Vec::new();
        let mut open: BTreeMap<(NodeId, u64), usize> = BTreeMap::new();
        for e in trace {
            match e.kind {
                EventKind::Note => {
                    if let Some(Note::Preload(v)) = &e.note {
                        ops.push(Operation {
                            client: None,
                            seq: 0,
                            start: e.time,
                            end: Some(e.time),
                            kind: OpKind::Preload { version: v.clone() },
                        });
                    }
                }
                EventKind::OpStart => {
                    let info = e.op.as_ref().ok_or_else(|| Error::MalformedTrace(format!("op_start #{} without op", e.seq)))?;
                    let kind = match &info.desc {
                        OpDesc::Put { key, .. } => OpKind::Put { key: key.clone(), version: None },
                        OpDesc::Rot { rot, keys, .. } => OpKind::Rot { rot: *rot, keys: keys.clone(), result: None },
                    };
                    if open.insert((e.node, info.seq), ops.len()).is_some() {
                        return Err(Error::MalformedTrace(format!("{} started op {} twice", e.node, info.seq)));
                    }
                    ops.push(Operation { client: Some(e.node), seq: info.seq, start: e.time, end: None, kind });
                }
                EventKind::OpEnd => {
                    let info = e.op.as_ref().ok_or_else(|| Error::MalformedTrace(format!("op_end #{} without op", e.seq)))?;
                    let idx = open
                        .remove(&(e.node, info.seq))
                        .ok_or_else(|| Error::MalformedTrace(format!("{} ended op {} it never started", e.node, info.seq)))?;
                    let op = &mut ops[idx];
                    op.end = Some(e.time);
                    match (&mut op.kind, &info.desc) {
                        (OpKind::Put { version, .. }, OpDesc::Put { version: v, .. }) => *version = v.clone(),
                        (OpKind::Rot { result, keys, .. }, OpDesc::Rot { result: r, .. }) => {
                            if let Some(r) = r {
                                if r.len() != keys.len() {
                                    return Err(Error::MalformedTrace(format!("{} op {}: {} results for {} keys", e.node, info.seq, r.len(), keys.len())));
                                }
                            }
                            *result = r.clone();
                        }
                        _ => return Err(Error::MalformedTrace(format!("{} op {} changed type", e.node, info.seq))),
                    }
                }
                _ => {}
            }
        }
        let mut writer = BTreeMap::new();
        for (i, op) in ops.iter().enumerate() {
            if let Some(v) = op.written() {
                if writer.insert(v.clone(), i).is_some() {
                    return Err(Error::MalformedTrace(format!("version {v} written twice")));
                }
            }
        }
        Ok(History { ops, writer })
    }

    /// Indices of operations per client in program order.
    pub fn by_client(&self) -> BTreeMap<NodeId, Vec<usize>> {
        let mut m: BTreeMap<NodeId, Vec<usize>> = BTreeMap::new();
        for (i, op) in self.ops.iter().enumerate() {
            if let Some(c) = op.client {
                m.entry(c).or_default().push(i);
            }
        }
        for v in m.values_mut() {
            v.sort_by_key(|&i| self.ops[i].seq);
        }
        m
    }

    pub fn pending(&self) -> usize {
        self.ops.iter().filter(|o| o.end.is_none()).count()
    }
}
