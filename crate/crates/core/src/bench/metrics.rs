//! Aggregates of one run.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::workload::WorkloadConfig;
use crate::transport::sim::{CompletedOp, KindStats, OpKind};
use crate::transport::{Counters, MessageKind};
use crate::types::{NodeId, RotId};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub engine: String,
    pub rot_mode: String,
    pub dcs: u8,
    pub partitions: u16,
    pub clients: u32,
    pub w: f64,
    pub p: u16,
    pub z: f64,
    pub b: usize,
    pub seed: u64,
    pub duration_ms: u64,
    pub puts: u64,
    pub rots: u64,
    /// Keys read by ROTs.
    pub reads: u64,
    /// PUTs and ROTs completed per second of issuing time.
    pub throughput_ops_s: f64,
    pub rot_latency_mean_us: f64,
    pub rot_latency_p99_us: u64,
    pub put_latency_mean_us: f64,
    /// PUTs over PUTs plus key reads.
    pub realized_write_ratio: f64,
    pub messages: u64,
    pub bytes: u64,
    /// Bytes of PUT-path traffic divided by the number of PUTs.
    pub bytes_per_put: f64,
    /// PUTs that ran a readers check.
    pub readers_checks: u64,
    /// Partitions contacted by readers checks.
    pub readers_check_partitions: u64,
    /// ROT ids returned per readers check, before merging.
    pub rotids_per_check: f64,
    /// Distinct ROT ids collected per readers check.
    pub distinct_rotids_per_check: f64,
    pub blocked_rots: u64,
    pub blocking_us_total: u64,
    pub per_kind: BTreeMap<MessageKind, KindStats>,
}

/// Nearest-rank percentile of an unsorted sample; 0 when empty.
pub fn percentile(values: &[u64], q: f64) -> u64 {
    if values.is_empty() {
        return 0;
    }
    let mut v = values.to_vec();
    v.sort_unstable();
    let rank = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[rank - 1]
}

fn mean(values: &[u64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<u64>() as f64 / values.len() as f64
    }
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

impl Metrics {
    /// Builds the metrics of a run from its completed operations (of the
    /// workload clients only), message statistics, merged actor counters
    /// and completed clock waits.
    pub fn compute(
        cfg: &WorkloadConfig,
        ops: &[CompletedOp],
        per_kind: &BTreeMap<MessageKind, KindStats>,
        counters: &Counters,
        blocks: &[(RotId, NodeId, u64)],
    ) -> Self {
        let lat = |k: OpKind| -> Vec<u64> { ops.iter().filter(|o| o.kind == k).map(|o| o.end_us - o.start_us).collect() };
        let rot_lat = lat(OpKind::Rot);
        let put_lat = lat(OpKind::Put);
        let reads: u64 = ops.iter().filter(|o| o.kind == OpKind::Rot).map(|o| o.keys as u64).sum();
        let puts = put_lat.len() as u64;
        let put_bytes: u64 = per_kind.iter().filter(|(k, _)| k.is_put_path()).map(|(_, s)| s.bytes).sum();
        let mut per_rot: BTreeMap<RotId, u64> = BTreeMap::new();
        for (rot, _, us) in blocks {
            let e = per_rot.entry(*rot).or_default();
            *e = (*e).max(*us);
        }
        let checks = counters.get("readers_checks");
        let secs = cfg.duration_ms as f64 / 1_000.0;
        Metrics {
            engine: cfg.engine.to_string(),
            rot_mode: cfg.engine_config().effective_rot_mode().map(|m| m.to_string()).unwrap_or_else(|| "1".into()),
            dcs: cfg.dcs,
            partitions: cfg.partitions,
            clients: cfg.clients,
            w: cfg.w,
            p: cfg.p,
            z: cfg.z,
            b: cfg.b,
            seed: cfg.seed,
            duration_ms: cfg.duration_ms,
            puts,
            rots: rot_lat.len() as u64,
            reads,
            throughput_ops_s: ops.len() as f64 / secs,
            rot_latency_mean_us: mean(&rot_lat),
            rot_latency_p99_us: percentile(&rot_lat, 0.99),
            put_latency_mean_us: mean(&put_lat),
            realized_write_ratio: ratio(puts, puts + reads),
            messages: per_kind.values().map(|s| s.messages).sum(),
            bytes: per_kind.values().map(|s| s.bytes).sum(),
            bytes_per_put: ratio(put_bytes, puts),
            readers_checks: checks,
            readers_check_partitions: counters.get("readers_check_partitions"),
            rotids_per_check: ratio(counters.get("readers_check_rotids_cumulative"), checks),
            distinct_rotids_per_check: ratio(counters.get("readers_check_rotids_distinct"), checks),
            blocked_rots: per_rot.len() as u64,
            blocking_us_total: per_rot.values().sum(),
            per_kind: per_kind.clone(),
        }
    }

    pub fn kind(&self, k: MessageKind) -> KindStats {
        self.per_kind.get(&k).copied().unwrap_or_default()
    }

    /// Distinct clients that completed at least one operation.
    pub fn active_clients(ops: &[CompletedOp]) -> usize {
        ops.iter().map(|o| o.client).collect::<BTreeSet<_>>().len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn op(kind: OpKind, keys: usize, start: u64, end: u64) -> CompletedOp {
        CompletedOp { client: NodeId::client(0, 0), kind, keys, start_us: start, end_us: end }
    }

    #[test]
    fn nearest_rank_percentile() {
        let v: Vec<u64> = (1..=100).collect();
        assert_eq!(percentile(&v, 0.99), 99);
        assert_eq!(percentile(&v, 1.0), 100);
        assert_eq!(percentile(&[7], 0.99), 7);
        assert_eq!(percentile(&[], 0.99), 0);
    }

    #[test]
    fn put_only_run_has_zero_rot_metrics() {
        let cfg = WorkloadConfig { w: 1.0, duration_ms: 1, ..Default::default() };
        let ops = vec![op(OpKind::Put, 1, 0, 10), op(OpKind::Put, 1, 10, 30)];
        let mut kinds = BTreeMap::new();
        kinds.insert(MessageKind::PutReq, KindStats { messages: 2, bytes: 100 });
        kinds.insert(MessageKind::PutResp, KindStats { messages: 2, bytes: 60 });
        let m = Metrics::compute(&cfg, &ops, &kinds, &Counters::default(), &[]);
        assert_eq!((m.rots, m.rot_latency_mean_us, m.rot_latency_p99_us), (0, 0.0, 0));
        assert_eq!(m.put_latency_mean_us, 15.0);
        assert_eq!(m.bytes_per_put, 80.0);
        assert_eq!(m.realized_write_ratio, 1.0);
        assert_eq!(m.throughput_ops_s, 2_000.0);
    }

    #[test]
    fn blocking_counts_each_rot_once() {
        let cfg = WorkloadConfig::default();
        let r = RotId { client: 1, seq: 1 };
        let blocks = [(r, NodeId::partition(0, 0), 100), (r, NodeId::partition(0, 1), 300)];
        let m = Metrics::compute(&cfg, &[], &BTreeMap::new(), &Counters::default(), &blocks);
        assert_eq!((m.blocked_rots, m.blocking_us_total), (1, 300));
    }
}
