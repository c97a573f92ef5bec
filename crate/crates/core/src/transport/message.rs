//! Protocol messages for all engines.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::clock::Timestamp;
use crate::storage::{GssVector, SnapshotVector, Version, VersionId};
use crate::types::{Key, PartitionId, RotId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageKind {
    RotReq,
    RotFwd,
    RotResp,
    PutReq,
    PutResp,
    Replicate,
    DepCheck,
    ReadersCheckReq,
    ReadersCheckResp,
    Heartbeat,
    StabExchange,
}

impl MessageKind {
    pub const ALL: [MessageKind; 11] = [
        MessageKind::RotReq,
        MessageKind::RotFwd,
        MessageKind::RotResp,
        MessageKind::PutReq,
        MessageKind::PutResp,
        MessageKind::Replicate,
        MessageKind::DepCheck,
        MessageKind::ReadersCheckReq,
        MessageKind::ReadersCheckResp,
        MessageKind::Heartbeat,
        MessageKind::StabExchange,
    ];

    /// Kind byte on the wire.
    pub fn code(self) -> u8 {
        self as u8 + 1
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(usize::from(code).checked_sub(1)?).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            MessageKind::RotReq => "rot_req",
            MessageKind::RotFwd => "rot_fwd",
            MessageKind::RotResp => "rot_resp",
            MessageKind::PutReq => "put_req",
            MessageKind::PutResp => "put_resp",
            MessageKind::Replicate => "replicate",
            MessageKind::DepCheck => "dep_check",
            MessageKind::ReadersCheckReq => "readers_check_req",
            MessageKind::ReadersCheckResp => "readers_check_resp",
            MessageKind::Heartbeat => "heartbeat",
            MessageKind::StabExchange => "stab_exchange",
        }
    }

    /// Traffic caused by writing: the request and reply, readers checks,
    /// replication and replica dependency checks.
    pub fn is_put_path(self) -> bool {
        matches!(
            self,
            MessageKind::PutReq
                | MessageKind::PutResp
                | MessageKind::Replicate
                | MessageKind::DepCheck
                | MessageKind::ReadersCheckReq
                | MessageKind::ReadersCheckResp
        )
    }

    /// Periodic traffic that flows even when no client is active.
    pub fn is_background(self) -> bool {
        matches!(self, MessageKind::Heartbeat | MessageKind::StabExchange)
    }

    pub fn is_rot(self) -> bool {
        matches!(self, MessageKind::RotReq | MessageKind::RotFwd | MessageKind::RotResp)
    }
}

impl fmt::Display for MessageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// What a client tells the coordinator about the snapshots it has seen.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClientCtx {
    pub highest_local_ts: Timestamp,
    pub highest_gss: GssVector,
}

/// Client metadata piggybacked on a PUT.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum PutCtx {
    /// Vector-clock engines: the client context.
    Vector(ClientCtx),
    /// Dependency-list engines: highest timestamp seen plus the versions
    /// read or written since the last PUT.
    Deps { ts: Timestamp, deps: Vec<VersionId> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReadResult {
    pub key: Key,
    pub version: Option<Version>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ReaderEntry {
    pub rot: RotId,
    pub read_time: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Payload {
    /// 1½-round ROT: client to every involved partition. Only the
    /// coordinator's copy carries the context and the involved set.
    RotStart { rot: RotId, keys: Vec<Key>, coord: Option<(ClientCtx, Vec<PartitionId>)> },
    /// 2-round ROT, first leg: ask the coordinator for a snapshot.
    SnapshotReq { rot: RotId, ctx: ClientCtx },
    SnapshotResp { rot: RotId, sv: SnapshotVector },
    /// 2-round ROT, second leg.
    RotRead { rot: RotId, keys: Vec<Key>, sv: SnapshotVector },
    /// Coordinator to the other involved partitions in the 1½-round protocol.
    RotForward { rot: RotId, sv: SnapshotVector },
    RotReply { rot: RotId, sv: Option<SnapshotVector>, reads: Vec<ReadResult> },
    /// One-round latency-optimal ROT.
    CcloRead { rot: RotId, keys: Vec<Key> },
    PutReq { key: Key, value: Vec<u8>, ctx: PutCtx },
    PutResp { version: VersionId, gss: Option<GssVector> },
    /// Asynchronous replication, FIFO per link via `seq`.
    Replicate { seq: u64, version: Version, deps: Vec<VersionId> },
    Heartbeat { seq: u64, ts: Timestamp },
    StabExchange { vv: SnapshotVector },
    ReadersCheckReq { check: u64, keys: Vec<Key> },
    /// Combined dependency and readers check for a replicated update: the
    /// answer is withheld until every listed version is installed.
    DepCheck { check: u64, deps: Vec<VersionId> },
    ReadersCheckResp { check: u64, readers: Vec<ReaderEntry> },
}

impl Payload {
    pub fn kind(&self) -> MessageKind {
        match self {
            Payload::RotStart { .. } | Payload::SnapshotReq { .. } | Payload::RotRead { .. } | Payload::CcloRead { .. } => {
                MessageKind::RotReq
            }
            Payload::RotForward { .. } => MessageKind::RotFwd,
            Payload::SnapshotResp { .. } | Payload::RotReply { .. } => MessageKind::RotResp,
            Payload::PutReq { .. } => MessageKind::PutReq,
            Payload::PutResp { .. } => MessageKind::PutResp,
            Payload::Replicate { .. } => MessageKind::Replicate,
            Payload::Heartbeat { .. } => MessageKind::Heartbeat,
            Payload::StabExchange { .. } => MessageKind::StabExchange,
            Payload::ReadersCheckReq { .. } => MessageKind::ReadersCheckReq,
            Payload::DepCheck { .. } => MessageKind::DepCheck,
            Payload::ReadersCheckResp { .. } => MessageKind::ReadersCheckResp,
        }
    }

    pub fn rot(&self) -> Option<RotId> {
        match self {
            Payload::RotStart { rot, .. }
            | Payload::SnapshotReq { rot, .. }
            | Payload::SnapshotResp { rot, .. }
            | Payload::RotRead { rot, .. }
            | Payload::RotForward { rot, .. }
            | Payload::RotReply { rot, .. }
            | Payload::CcloRead { rot, .. } => Some(*rot),
            _ => None,
        }
    }

    /// Number of keys a ROT request asks this destination to read.
    pub fn requested_keys(&self) -> usize {
        match self {
            Payload::RotStart { keys, .. } | Payload::RotRead { keys, .. } | Payload::CcloRead { keys, .. } => keys.len(),
            _ => 0,
        }
    }

    /// Number of read results carried by a ROT reply.
    pub fn returned_versions(&self) -> usize {
        match self {
            Payload::RotReply { reads, .. } => reads.len(),
            _ => 0,
        }
    }

    /// Number of ROT ids carried by a readers-check response.
    pub fn reader_ids(&self) -> usize {
        match self {
            Payload::ReadersCheckResp { readers, .. } => readers.len(),
            _ => 0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_codes_round_trip() {
        for k in MessageKind::ALL {
            assert_eq!(MessageKind::from_code(k.code()), Some(k));
        }
        assert_eq!(MessageKind::from_code(0), None);
        assert_eq!(MessageKind::from_code(12), None);
    }
}
