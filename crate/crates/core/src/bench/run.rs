//! Running a workload on either backend.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::metrics::Metrics;
use super::workload::{KeySpace, WorkloadConfig, WorkloadSource};
use super::zipf::Zipf;
use crate::cluster::SimCluster;
use crate::engine::{ClientOp, Script};
use crate::transport::sim::{ClockSkew, Schedule, SimConfig};
use crate::transport::trace::EventKind;
use crate::transport::{socket, Counters, OpDesc, TraceEvent};
use crate::types::{ClientId, NodeId};
use crate::Result;

/// Clients with ids at or above this value are probes, not workload.
pub const PROBE_BASE: ClientId = 1 << 30;

#[derive(Debug, Clone)]
pub struct Experiment {
    pub metrics: Metrics,
    /// Present when the workload asked for it.
    pub trace: Option<Vec<TraceEvent>>,
}

/// Clock offsets drawn uniformly from `[-skew_us, skew_us]` per partition.
pub fn random_skews(cfg: &WorkloadConfig) -> Result<BTreeMap<NodeId, ClockSkew>> {
    let mut out = BTreeMap::new();
    if cfg.skew_us == 0 {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_c10c);
    let s = cfg.skew_us as i64;
    for n in cfg.topology()?.all_partition_nodes() {
        out.insert(n, ClockSkew { offset_us: rng.gen_range(-s..=s), drift_ppm: 0 });
    }
    Ok(out)
}

/// The simulator settings `run_experiment` uses for `cfg`.
pub fn sim_config(cfg: &WorkloadConfig) -> Result<SimConfig> {
    Ok(SimConfig {
        schedule: Schedule::new(cfg.seed, cfg.delay).with_remote(cfg.remote_delay),
        skew: random_skews(cfg)?,
        service: cfg.service,
        record_trace: cfg.record_trace,
    })
}

fn client_ids(cfg: &WorkloadConfig) -> impl Iterator<Item = NodeId> + '_ {
    (0..cfg.clients).map(move |id| NodeId::client((id % u32::from(cfg.dcs)) as u8, id))
}

struct Shared {
    keys: Arc<KeySpace>,
    zipf: Arc<Zipf>,
}

fn shared(cfg: &WorkloadConfig) -> Result<Shared> {
    Ok(Shared {
        keys: Arc::new(KeySpace::new(cfg.topology()?, cfg.keyspace)),
        zipf: Arc::new(Zipf::new(cfg.keyspace, cfg.z)?),
    })
}

pub fn run_experiment(cfg: &WorkloadConfig) -> Result<Experiment> {
    run_with(cfg, sim_config(cfg)?)
}

/// Runs `cfg` on the simulator with explicit simulator settings.
///
/// After the issuing period the run drains, waits long enough for
/// replication and stabilization to settle, and (when a trace is recorded)
/// lets one probe client per DC read every written key so that eventual
/// visibility can be judged from the trace.
pub fn run_with(cfg: &WorkloadConfig, sim: SimConfig) -> Result<Experiment> {
    cfg.validate()?;
    let engine = cfg.engine_config();
    let settle_us = 4 * (engine.stabilization_us + engine.heartbeat_us.unwrap_or(0))
        + 4 * (sim.schedule.law.upper_bound_us() + sim.schedule.remote.map_or(0, |l| l.upper_bound_us()));
    let limit_us = cfg.duration_us() + 60_000_000;
    let sh = shared(cfg)?;
    let mut c = SimCluster::new(cfg.topology()?, engine, sim)?;
    for node in client_ids(cfg) {
        let NodeId::Client { dc, id } = node else { unreachable!() };
        c.add_client(dc, id, Box::new(WorkloadSource::new(cfg, id, sh.keys.clone(), sh.zipf.clone())), 0);
    }
    c.sim.run_until_quiescent(limit_us)?;
    if cfg.record_trace {
        let written: BTreeSet<_> = c
            .sim
            .trace()
            .iter()
            .filter(|e| e.kind == EventKind::OpEnd)
            .filter_map(|e| match &e.op.as_ref()?.desc {
                OpDesc::Put { key, .. } => Some(key.clone()),
                OpDesc::Rot { .. } => None,
            })
            .collect();
        let start = c.sim.now_us() + settle_us;
        if !written.is_empty() {
            let keys: Vec<_> = written.into_iter().collect();
            for dc in 0..cfg.dcs {
                let probe = Script::new([(0, ClientOp::Rot { keys: keys.clone() })]);
                c.add_client(dc, PROBE_BASE + u32::from(dc), Box::new(probe), start);
            }
        }
        c.sim.run_until_quiescent(start + limit_us)?;
    } else {
        let t = c.sim.now_us() + settle_us;
        c.sim.run_until(t)?;
    }
    c.sim.record_final_state();
    let ops: Vec<_> = c.sim.stats().ops.iter().filter(|o| !is_probe(o.client)).cloned().collect();
    let mut counters = Counters::default();
    for (_, a) in c.sim.actors() {
        counters.merge(&a.counters());
    }
    let stats = c.sim.stats().clone();
    let metrics = Metrics::compute(cfg, &ops, &stats.messages, &counters, &stats.blocks);
    let trace = cfg.record_trace.then(|| c.sim.take_trace());
    Ok(Experiment { metrics, trace })
}

fn is_probe(n: NodeId) -> bool {
    matches!(n, NodeId::Client { id, .. } if id >= PROBE_BASE)
}

/// Runs `cfg` over loopback TCP in real time. Blocking time is not
/// measured on this backend.
pub fn run_socket(cfg: &WorkloadConfig) -> Result<Metrics> {
    cfg.validate()?;
    let topo = cfg.topology()?;
    let engine = cfg.engine_config();
    let sh = shared(cfg)?;
    let mut actors = BTreeMap::new();
    for node in topo.all_partition_nodes() {
        actors.insert(node, engine.partition(topo, node.dc(), node.part().expect("partition")));
    }
    for node in client_ids(cfg) {
        let NodeId::Client { dc, id } = node else { unreachable!() };
        let src = WorkloadSource::new(cfg, id, sh.keys.clone(), sh.zipf.clone());
        actors.insert(node, engine.client(topo, dc, id, Box::new(src)));
    }
    let grace = Duration::from_millis(500);
    let rep = socket::run(actors, &random_skews(cfg)?, Duration::from_millis(cfg.duration_ms) + grace)?;
    let mut counters = Counters::default();
    for a in rep.actors.values() {
        counters.merge(&a.counters());
    }
    Ok(Metrics::compute(cfg, &rep.ops, &rep.messages, &counters, &[]))
}
