//! Identifiers shared by every layer.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Data center index.
pub type DcId = u8;
/// Partition index within a data center.
pub type PartitionId = u16;
/// Globally unique client index.
pub type ClientId = u32;

pub type Key = String;

/// An addressable actor: a partition replica or a client.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeId {
    Partition { dc: DcId, part: PartitionId },
    Client { dc: DcId, id: ClientId },
}

impl NodeId {
    pub fn partition(dc: DcId, part: PartitionId) -> Self {
        NodeId::Partition { dc, part }
    }

    pub fn client(dc: DcId, id: ClientId) -> Self {
        NodeId::Client { dc, id }
    }

    pub fn dc(&self) -> DcId {
        match *self {
            NodeId::Partition { dc, .. } | NodeId::Client { dc, .. } => dc,
        }
    }

    pub fn is_client(&self) -> bool {
        matches!(self, NodeId::Client { .. })
    }

    pub fn part(&self) -> Option<PartitionId> {
        match *self {
            NodeId::Partition { part, .. } => Some(part),
            NodeId::Client { .. } => None,
        }
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeId::Partition { dc, part } => write!(f, "p{dc}.{part}"),
            NodeId::Client { dc, id } => write!(f, "c{dc}.{id}"),
        }
    }
}

impl FromStr for NodeId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("bad node id {s:?}");
        let (tag, rest) = s.split_at_checked(1).ok_or_else(bad)?;
        let (dc, idx) = rest.split_once('.').ok_or_else(bad)?;
        let dc: DcId = dc.parse().map_err(|_| bad())?;
        match tag {
            "p" => Ok(NodeId::partition(dc, idx.parse().map_err(|_| bad())?)),
            "c" => Ok(NodeId::client(dc, idx.parse().map_err(|_| bad())?)),
            _ => Err(bad()),
        }
    }
}

impl Serialize for NodeId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for NodeId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Unique id of a read-only transaction: issuing client plus a per-client
/// sequence number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RotId {
    pub client: ClientId,
    pub seq: u32,
}

impl fmt::Display for RotId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.client, self.seq)
    }
}

/// 64-bit FNV-1a. Used for key placement and payload digests, so it must stay
/// stable across platforms and releases.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
