//! Run traces: one JSON object per line.
//!
//! Stable fields on every line: `seq`, `time` (microseconds), `step`, `node`,
//! `kind`, `digest` (hex FNV-1a of the payload bytes, empty when there is no
//! payload) and `bytes` (frame size for messages, zero otherwise). Optional
//! detail objects: `msg`, `op`, `timer`, `note`, `state`.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::message::MessageKind;
use super::{Note, TimerKind};
use crate::storage::VersionId;
use crate::types::{Key, NodeId, RotId};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    OpStart,
    OpEnd,
    MsgSend,
    MsgDeliver,
    Timer,
    Note,
    FinalState,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MsgInfo {
    pub id: u64,
    pub src: NodeId,
    pub dst: NodeId,
    pub kind: MessageKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rot: Option<RotId>,
    /// Keys requested (ROT requests).
    #[serde(default, skip_serializing_if = "is_zero")]
    pub keys: u32,
    /// Read results carried (ROT replies).
    #[serde(default, skip_serializing_if = "is_zero")]
    pub versions: u32,
    /// ROT ids carried (readers-check responses).
    #[serde(default, skip_serializing_if = "is_zero")]
    pub readers: u32,
}

fn is_zero(v: &u32) -> bool {
    *v == 0
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum OpDesc {
    Put {
        key: Key,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        version: Option<VersionId>,
    },
    Rot {
        rot: RotId,
        keys: Vec<Key>,
        /// One entry per requested key, `None` for ⊥. Present on `op_end`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        result: Option<Vec<Option<VersionId>>>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpInfo {
    /// Per-client operation sequence number.
    pub seq: u64,
    pub desc: OpDesc,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub seq: u64,
    pub time: u64,
    pub step: u64,
    pub node: NodeId,
    pub kind: EventKind,
    pub digest: String,
    pub bytes: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub msg: Option<MsgInfo>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub op: Option<OpInfo>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timer: Option<TimerKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<Note>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<Vec<VersionId>>,
}

impl TraceEvent {
    pub fn new(seq: u64, time: u64, step: u64, node: NodeId, kind: EventKind) -> Self {
        TraceEvent {
            seq,
            time,
            step,
            node,
            kind,
            digest: String::new(),
            bytes: 0,
            msg: None,
            op: None,
            timer: None,
            note: None,
            state: None,
        }
    }
}

pub fn digest_hex(bytes: &[u8]) -> String {
    format!("{:016x}", crate::types::fnv1a64(bytes))
}

pub fn write_jsonl(events: &[TraceEvent], mut w: impl Write) -> Result<()> {
    for e in events {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn to_jsonl(events: &[TraceEvent]) -> String {
    let mut out = Vec::new();
    write_jsonl(events, &mut out).expect("writing to a Vec cannot fail");
    String::from_utf8(out).expect("serde_json emits UTF-8")
}

pub fn read_jsonl(r: impl BufRead) -> Result<Vec<TraceEvent>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let ev = serde_json::from_str(&line).map_err(|e| Error::MalformedTrace(format!("line {}: {e}", i + 1)))?;
        out.push(ev);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::Timestamp;

    #[test]
    fn stable_field_names() {
        let mut e = TraceEvent::new(1, 20, 3, NodeId::client(0, 4), EventKind::OpEnd);
        e.op = Some(OpInfo {
            seq: 0,
            desc: OpDesc::Put {
                key: "k".into(),
                version: Some(VersionId { key: "k".into(), ts: Timestamp(9), dc: 0 }),
            },
        });
        let line = to_jsonl(&[e.clone()]);
        let v: serde_json::Value = serde_json::from_str(line.trim()).unwrap();
        for f in ["seq", "time", "step", "node", "kind", "digest", "bytes", "op"] {
            assert!(v.get(f).is_some(), "missing {f}");
        }
        assert_eq!(v["node"], "c0.4");
        assert_eq!(v["kind"], "op_end");
        assert_eq!(read_jsonl(line.as_bytes()).unwrap(), vec![e]);
    }

    #[test]
    fn malformed_line_is_reported() {
        let err = read_jsonl("{\"seq\":1}\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::MalformedTrace(_)));
    }
}
