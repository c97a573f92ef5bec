//! Closed-loop workload: operation mix, key choice and run parameters.

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::zipf::Zipf;
use crate::cluster::Topology;
use crate::engine::{ClientOp, EngineConfig, EngineKind, OpSource, RotMode};
use crate::transport::sim::{DelayLaw, ServiceModel};
use crate::types::{ClientId, Key};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorkloadConfig {
    pub engine: EngineKind,
    pub rot_mode: RotMode,
    /// Write ratio: #PUT / (#PUT + #reads), a ROT over k keys counting as k reads.
    pub w: f64,
    /// Partitions touched by each ROT.
    pub p: u16,
    /// Zipfian skew of key popularity inside a partition.
    pub z: f64,
    /// Value size in bytes.
    pub b: usize,
    /// Total closed-loop clients, spread round-robin over the DCs.
    pub clients: u32,
    pub partitions: u16,
    pub dcs: u8,
    /// Keys per partition.
    pub keyspace: u64,
    pub seed: u64,
    /// Time during which clients issue new operations.
    pub duration_ms: u64,
    /// Client pause between an operation's reply and the next request.
    pub think_us: u64,
    /// Delay of links inside a DC.
    pub delay: DelayLaw,
    /// Delay of links between DCs.
    pub remote_delay: DelayLaw,
    /// Partition clock offsets are drawn uniformly from `[-skew_us, skew_us]`.
    pub skew_us: u64,
    pub service: ServiceModel,
    /// Record a full trace and run the checker probes after the run.
    pub record_trace: bool,
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        WorkloadConfig {
            engine: EngineKind::Contrarian,
            rot_mode: RotMode::OneAndHalf,
            w: 0.05,
            p: 4,
            z: 0.99,
            b: 8,
            clients: 16,
            partitions: 8,
            dcs: 1,
            keyspace: 10_000,
            seed: 1,
            duration_ms: 1_000,
            think_us: 0,
            delay: DelayLaw::Uniform { lo_us: 50, hi_us: 150 },
            remote_delay: DelayLaw::Uniform { lo_us: 5_000, hi_us: 10_000 },
            skew_us: 0,
            service: ServiceModel::default(),
            record_trace: false,
        }
    }
}

impl WorkloadConfig {
    pub fn validate(&self) -> Result<()> {
        let topo = self.topology()?;
        if !(0.0..=1.0).contains(&self.w) {
            return Err(Error::config(format!("w must lie in [0, 1], got {}", self.w)));
        }
        if self.p == 0 || self.p > topo.partitions() {
            return Err(Error::config(format!("p must lie in [1, {}], got {}", topo.partitions(), self.p)));
        }
        if !(self.z >= 0.0 && self.z.is_finite()) {
            return Err(Error::config(format!("z must be finite and >= 0, got {}", self.z)));
        }
        if self.keyspace == 0 {
            return Err(Error::config("keyspace must be at least 1"));
        }
        if self.clients == 0 {
            return Err(Error::config("at least one client is required"));
        }
        if self.duration_ms == 0 {
            return Err(Error::config("duration must be positive"));
        }
        self.engine_config().validate()
    }

    pub fn topology(&self) -> Result<Topology> {
        Topology::new(self.dcs, self.partitions)
    }

    pub fn engine_config(&self) -> EngineConfig {
        EngineConfig::new(self.engine).with_rot_mode(self.rot_mode)
    }

    pub fn duration_us(&self) -> u64 {
        self.duration_ms * 1_000
    }

    /// Probability that an operation is a PUT, so that the realized ratio of
    /// PUTs to PUTs plus key reads equals `w`.
    pub fn put_probability(&self) -> f64 {
        let (w, p) = (self.w, f64::from(self.p));
        if w >= 1.0 {
            return 1.0;
        }
        w * p / (1.0 - w + w * p)
    }
}

/// The first `per_partition` keys (`k0`, `k1`, ...) that land on each partition.
#[derive(Debug, Clone)]
pub struct KeySpace {
    pub keys: Vec<Vec<Key>>,
}

impl KeySpace {
    pub fn new(topo: Topology, per_partition: u64) -> Self {
        let n = usize::from(topo.partitions());
        let want = per_partition as usize;
        let mut keys: Vec<Vec<Key>> = vec![Vec::with_capacity(want); n];
        let mut full = 0;
        let mut i = 0u64;
        while full < n {
            let k = format!("k{i}");
            let bucket = &mut keys[usize::from(topo.locate(&k))];
            if bucket.len() < want {
                bucket.push(k);
                if bucket.len() == want {
                    full += 1;
                }
            }
            i += 1;
        }
        KeySpace { keys }
    }
}

/// Operation generator of one closed-loop client.
pub struct WorkloadSource {
    rng: ChaCha8Rng,
    keys: Arc<KeySpace>,
    zipf: Arc<Zipf>,
    put_probability: f64,
    p: usize,
    value: Vec<u8>,
    think_us: u64,
    deadline_us: u64,
}

impl WorkloadSource {
    pub fn new(cfg: &WorkloadConfig, client: ClientId, keys: Arc<KeySpace>, zipf: Arc<Zipf>) -> Self {
        let seed = cfg.seed ^ u64::from(client).wrapping_mul(0x9e37_79b9_7f4a_7c15);
        WorkloadSource {
            rng: ChaCha8Rng::seed_from_u64(seed),
            keys,
            zipf,
            put_probability: cfg.put_probability(),
            p: usize::from(cfg.p),
            value: vec![0xab; cfg.b],
            think_us: cfg.think_us,
            deadline_us: cfg.duration_us(),
        }
    }

    fn key(&mut self, part: usize) -> Key {
        let i = self.zipf.sample(&mut self.rng) as usize;
        self.keys.keys[part][i].clone()
    }

    pub fn draw(&mut self) -> ClientOp {
        let n = self.keys.keys.len();
        if self.rng.gen_bool(self.put_probability) {
            let part = self.rng.gen_range(0..n);
            ClientOp::Put { key: self.key(part), value: self.value.clone() }
        } else {
            let parts: BTreeSet<usize> = index::sample(&mut self.rng, n, self.p).into_iter().collect();
            ClientOp::Rot { keys: parts.into_iter().map(|part| self.key(part)).collect() }
        }
    }
}

impl OpSource for WorkloadSource {
    fn next_op(&mut self, now_us: u64) -> Option<(u64, ClientOp)> {
        if now_us + self.think_us >= self.deadline_us {
            return None;
        }
        Some((self.think_us, self.draw()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_workload_table() {
        let c = WorkloadConfig::default();
        assert_eq!((c.w, c.p, c.z, c.b), (0.05, 4, 0.99, 8));
        c.validate().unwrap();
    }

    #[test]
    fn validation() {
        let bad = [
            WorkloadConfig { w: 1.5, ..Default::default() },
            WorkloadConfig { p: 0, ..Default::default() },
            WorkloadConfig { p: 9, ..Default::default() },
            WorkloadConfig { z: -1.0, ..Default::default() },
            WorkloadConfig { partitions: 1, p: 1, ..Default::default() },
            WorkloadConfig { clients: 0, ..Default::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }

    #[test]
    fn put_probability_edges() {
        let c = |w| WorkloadConfig { w, ..Default::default() }.put_probability();
        assert_eq!(c(0.0), 0.0);
        assert_eq!(c(1.0), 1.0);
        // One PUT per 19 key reads: 4 PUTs per 19 ROTs of 4 keys.
        assert!((c(0.05) - 4.0 / 23.0).abs() < 1e-12);
    }

    #[test]
    fn keyspace_buckets_by_partition() {
        let topo = Topology::new(1, 4).unwrap();
        let ks = KeySpace::new(topo, 50);
        for (p, keys) in ks.keys.iter().enumerate() {
            assert_eq!(keys.len(), 50);
            assert!(keys.iter().all(|k| usize::from(topo.locate(k)) == p));
        }
    }

    #[test]
    fn rots_touch_distinct_partitions() {
        let cfg = WorkloadConfig { w: 0.0, ..Default::default() };
        let topo = cfg.topology().unwrap();
        let ks = Arc::new(KeySpace::new(topo, 100));
        let zipf = Arc::new(Zipf::new(100, cfg.z).unwrap());
        let mut src = WorkloadSource::new(&cfg, 3, ks, zipf);
        for _ in 0..200 {
            let ClientOp::Rot { keys } = src.draw() else { panic!("w = 0 must give ROTs") };
            let parts: BTreeSet<_> = keys.iter().map(|k| topo.locate(k)).collect();
            assert_eq!(parts.len(), 4);
        }
    }

    #[test]
    fn stops_at_deadline() {
        let cfg = WorkloadConfig { duration_ms: 1, ..Default::default() };
        let topo = cfg.topology().unwrap();
        let mut src = WorkloadSource::new(&cfg, 0, Arc::new(KeySpace::new(topo, 10)), Arc::new(Zipf::new(10, 0.0).unwrap()));
        assert!(src.next_op(999).is_some());
        assert!(src.next_op(1_000).is_none());
    }
}
