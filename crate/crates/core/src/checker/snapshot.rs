//! Causally consistent snapshots.
//!
//! A ROT returning `X` for key `x` is wrong if some other version `X'` of `x`
//! with `X ⤳ X'` belongs to what the ROT must already reflect: the causal
//! past of the client before the ROT, or the causal past of any version the
//! ROT returned. ⊥ precedes every version of its key.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::graph::CausalityGraph;
use super::history::{History, OpKind};
use crate::storage::VersionId;
use crate::types::{Key, NodeId, RotId};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotViolation {
    pub client: NodeId,
    pub rot: RotId,
    pub key: Key,
    /// What the ROT returned (`None` is ⊥).
    pub returned: Option<VersionId>,
    /// The newer version of the same key it should have observed.
    pub missed: VersionId,
    /// The returned version whose past contains `missed`; `None` when it
    /// comes from the client's own past.
    pub via: Option<VersionId>,
}

pub fn check_snapshots(h: &History, g: &CausalityGraph) -> Vec<SnapshotViolation> {
    let mut writers_of: BTreeMap<&Key, Vec<usize>> = BTreeMap::new();
    for (i, op) in h.ops.iter().enumerate() {
        if let Some(v) = op.written() {
            writers_of.entry(&v.key).or_default().push(i);
        }
    }
    let mut out = Vec::new();
    for (i, op) in h.ops.iter().enumerate() {
        let OpKind::Rot { rot, keys, result: Some(result) } = &op.kind else {
            continue;
        };
        let returned_ops: Vec<(usize, &VersionId)> =
            result.iter().flatten().map(|v| (h.writer[v], v)).collect();
        let prev = g.prev[i];
        // Where a version must be reflected from, if anywhere.
        let required_by = |w: usize| -> Option<Option<VersionId>> {
            if prev.is_some_and(|p| p == w || g.precedes(w, p)) {
                return Some(None);
            }
            returned_ops
                .iter()
                .find(|&&(y, _)| y == w || g.precedes(w, y))
                .map(|&(_, v)| Some(v.clone()))
        };
        for (key, ret) in keys.iter().zip(result) {
            let ret_op = ret.as_ref().map(|v| h.writer[v]);
            for &w in writers_of.get(key).map(Vec::as_slice).unwrap_or_default() {
                if Some(w) == ret_op {
                    continue;
                }
                if let Some(x) = ret_op {
                    if !g.precedes(x, w) {
                        continue;
                    }
                }
                if let Some(via) = required_by(w) {
                    out.push(SnapshotViolation {
                        client: op.client.expect("ROTs have clients"),
                        rot: *rot,
                        key: key.clone(),
                        returned: ret.clone(),
                        missed: h.ops[w].written().expect("writer").clone(),
                        via,
                    });
                    break;
                }
            }
        }
    }
    out
}
