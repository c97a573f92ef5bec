//! Key placement and node naming.

use serde::{Deserialize, Serialize};

use crate::types::{fnv1a64, DcId, Key, NodeId, PartitionId};
use crate::{Error, Result};

/// `partitions` partitions, each fully replicated in all `dcs` data centers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topology {
    dcs: u8,
    partitions: u16,
}

impl Topology {
    /// Requires at least one DC and more than one partition.
    pub fn new(dcs: u8, partitions: u16) -> Result<Self> {
        if dcs == 0 {
            return Err(Error::config("at least one data center is required"));
        }
        if partitions < 2 {
            return Err(Error::config("the data set must be split into more than one partition"));
        }
        Ok(Topology { dcs, partitions })
    }

    pub fn dcs(&self) -> u8 {
        self.dcs
    }

    pub fn partitions(&self) -> u16 {
        self.partitions
    }

    pub fn locate(&self, key: &str) -> PartitionId {
        (fnv1a64(key.as_bytes()) % u64::from(self.partitions)) as PartitionId
    }

    /// The replica of `key` in every DC, indexed by DC.
    pub fn replicas(&self, key: &str) -> Vec<NodeId> {
        let p = self.locate(key);
        (0..self.dcs).map(|dc| NodeId::partition(dc, p)).collect()
    }

    pub fn node(&self, dc: DcId, key: &str) -> NodeId {
        NodeId::partition(dc, self.locate(key))
    }

    pub fn partition_nodes(&self, dc: DcId) -> impl Iterator<Item = NodeId> {
        (0..self.partitions).map(move |p| NodeId::partition(dc, p))
    }

    pub fn all_partition_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.dcs).flat_map(move |dc| self.partition_nodes(dc))
    }

    /// The first key of the form `{prefix}{i}` that lands on `part`.
    pub fn key_on(&self, part: PartitionId, prefix: &str) -> Key {
        (0u64..)
            .map(|i| format!("{prefix}{i}"))
            .find(|k| self.locate(k) == part)
            .expect("fnv spreads keys over every partition")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_single_partition() {
        assert!(Topology::new(1, 1).is_err());
        assert!(Topology::new(0, 4).is_err());
        assert!(Topology::new(1, 2).is_ok());
    }

    #[test]
    fn locate_is_stable() {
        let t = Topology::new(2, 8).unwrap();
        assert_eq!(t.locate("alpha"), t.locate("alpha"));
        let r = t.replicas("alpha");
        assert_eq!(r.len(), 2);
        assert_eq!(r[0].part(), r[1].part());
    }

    #[test]
    fn key_on_finds_requested_partition() {
        let t = Topology::new(1, 8).unwrap();
        for p in 0..8 {
            assert_eq!(t.locate(&t.key_on(p, "x")), p);
        }
    }

    #[test]
    fn load_is_near_uniform() {
        let t = Topology::new(1, 8).unwrap();
        let mut counts = [0u64; 8];
        let n = 100_000u64;
        for i in 0..n {
            counts[t.locate(&format!("k{i}")) as usize] += 1;
        }
        let expected = n as f64 / 8.0;
        for c in counts {
            assert!((c as f64 - expected).abs() / expected < 0.05, "{counts:?}");
        }
        // Chi-square with 7 degrees of freedom; 24.32 is the 0.001 critical value.
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        assert!(chi2 < 24.32, "chi2 = {chi2}");
    }
}
