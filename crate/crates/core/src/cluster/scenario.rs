//! Small hand-timed executions that exercise the snapshot rules.
//!
//! * `fig1`: one DC, two partitions holding x and y. C1 reads {x, y} while C2
//!   writes X1 then Y1; C1's request to y's partition is slow, so it arrives
//!   after Y1 is installed. A correct engine returns (X0, Y0).
//! * `fig2`: the same execution, run to show the readers check that Y1's PUT
//!   triggers on x's partition before the PUT returns.
//! * `e_star_demo`: a writer produces X0, Y0, X1, Y1 in order. One group of
//!   readers reads x before X1 and y after Y1, the other reads y early and
//!   x late. Every returned snapshot must still be causal.

use crate::checker::{self, CheckReport};
use crate::clock::{ClockMode, Timestamp};
use crate::engine::{ClientOp, EngineConfig, EngineKind, Script};
use crate::storage::{TsVector, Version, VersionId};
use crate::transport::sim::{DelayLaw, Schedule, SimConfig};
use crate::transport::trace::EventKind;
use crate::transport::{OpDesc, TraceEvent};
use crate::types::{Key, NodeId};
use crate::{Error, Result};

use super::{SimCluster, Topology};

pub const SCENARIOS: &[&str] = &["fig1", "fig2", "e_star_demo"];

const LIMIT_US: u64 = 10_000_000;

#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub name: String,
    pub engine: EngineConfig,
    pub x: Key,
    pub y: Key,
    pub trace: Vec<TraceEvent>,
    pub report: CheckReport,
}

impl ScenarioOutcome {
    /// Results of every completed ROT issued by `client`, in issue order.
    pub fn rot_results(&self, client: NodeId) -> Vec<Vec<Option<VersionId>>> {
        self.trace
            .iter()
            .filter(|e| e.kind == EventKind::OpEnd && e.node == client)
            .filter_map(|e| match &e.op.as_ref()?.desc {
                OpDesc::Rot { result, .. } => result.clone(),
                OpDesc::Put { .. } => None,
            })
            .collect()
    }

    /// Versions created by `client`'s PUTs, in completion order.
    pub fn writes(&self, client: NodeId) -> Vec<VersionId> {
        self.trace
            .iter()
            .filter(|e| e.kind == EventKind::OpEnd && e.node == client)
            .filter_map(|e| match &e.op.as_ref()?.desc {
                OpDesc::Put { version, .. } => version.clone(),
                OpDesc::Rot { .. } => None,
            })
            .collect()
    }

    /// Time of the first trace event matching `pred`.
    pub fn first_time(&self, pred: impl Fn(&TraceEvent) -> bool) -> Option<u64> {
        self.trace.iter().find(|e| pred(e)).map(|e| e.time)
    }
}

pub fn run_scenario(name: &str, engine: &EngineConfig) -> Result<ScenarioOutcome> {
    match name {
        "fig1" | "fig2" => concurrent_write(name, engine),
        "e_star_demo" => e_star_demo(engine, 2),
        _ => Err(Error::UnknownScenario(name.to_string())),
    }
}

fn put(key: &Key, value: &str) -> ClientOp {
    ClientOp::Put { key: key.clone(), value: value.as_bytes().to_vec() }
}

fn rot(x: &Key, y: &Key) -> ClientOp {
    ClientOp::Rot { keys: vec![x.clone(), y.clone()] }
}

fn finish(name: &str, engine: &EngineConfig, x: Key, y: Key, mut c: SimCluster) -> Result<ScenarioOutcome> {
    c.finish(LIMIT_US)?;
    let trace = c.sim.take_trace();
    let report = checker::check(&trace)?;
    Ok(ScenarioOutcome { name: name.to_string(), engine: engine.clone(), x, y, trace, report })
}

/// Client ids used by the two-client scenarios.
pub const C1: NodeId = NodeId::Client { dc: 0, id: 1 };
pub const C2: NodeId = NodeId::Client { dc: 0, id: 2 };

fn concurrent_write(name: &str, engine: &EngineConfig) -> Result<ScenarioOutcome> {
    let topo = Topology::new(1, 2)?;
    let (x, y) = (topo.key_on(0, "x"), topo.key_on(1, "y"));
    let (px, py) = (topo.node(0, &x), topo.node(0, &y));
    let mut engine = engine.clone();
    // Logical clocks reproduce the hand-computed timestamps exactly; a
    // physical clock cannot be used that way.
    if engine.kind != EngineKind::Cure && engine.clock_mode.is_none() {
        engine.clock_mode = Some(ClockMode::PureLogical);
    }
    let slow = DelayLaw::Fixed { us: 20_000 };
    let schedule = Schedule::new(1, DelayLaw::Fixed { us: 1_000 })
        .with_link(C1, py, slow)
        .with_link(px, py, slow);
    let sim = SimConfig { schedule, record_trace: true, ..Default::default() };
    let mut c = SimCluster::new(topo, engine.clone(), sim)?;
    for (k, v) in [(&x, "X0"), (&y, "Y0")] {
        c.preload(Version::new(k.clone(), v.as_bytes().to_vec(), TsVector::zeros(1), 0, Timestamp(70)))?;
    }
    c.set_partition_clock(px, Timestamp(90))?;
    c.set_partition_clock(py, Timestamp(90))?;
    c.add_client(0, 1, Box::new(Script::new([(0, rot(&x, &y))])), 0);
    c.set_client_clock(C1, Timestamp(100))?;
    c.add_client(0, 2, Box::new(Script::new([(0, put(&x, "X1")), (0, put(&y, "Y1"))])), 4_000);
    finish(name, &engine, x, y, c)
}

/// Writer client id in `e_star_demo`; readers follow from id 10.
pub const WRITER: NodeId = NodeId::Client { dc: 0, id: 1 };

/// Reader ids of `e_star_demo`: the first group reads x early, the second y.
pub fn e_star_readers(per_group: u32) -> (Vec<NodeId>, Vec<NodeId>) {
    let g1 = (0..per_group).map(|i| NodeId::client(0, 10 + i)).collect();
    let g2 = (0..per_group).map(|i| NodeId::client(0, 10 + per_group + i)).collect();
    (g1, g2)
}

pub fn e_star_demo(engine: &EngineConfig, per_group: u32) -> Result<ScenarioOutcome> {
    let topo = Topology::new(1, 2)?;
    let (x, y) = (topo.key_on(0, "x"), topo.key_on(1, "y"));
    let (px, py) = (topo.node(0, &x), topo.node(0, &y));
    let (g1, g2) = e_star_readers(per_group);
    let fast = DelayLaw::Fixed { us: 1_000 };
    let slow = DelayLaw::Fixed { us: 40_000 };
    let mut schedule = Schedule::new(1, fast);
    for &r in &g1 {
        schedule = schedule.with_link(r, py, slow);
    }
    for &r in &g2 {
        schedule = schedule.with_link(r, px, slow);
    }
    let sim = SimConfig { schedule, record_trace: true, ..Default::default() };
    let mut c = SimCluster::new(topo, engine.clone(), sim)?;
    let writes = Script::new([(0, put(&x, "X0")), (0, put(&y, "Y0")), (8_000, put(&x, "X1")), (0, put(&y, "Y1"))]);
    c.add_client(0, 1, Box::new(writes), 0);
    for r in g1.iter().chain(&g2) {
        let NodeId::Client { id, .. } = *r else { unreachable!() };
        c.add_client(0, id, Box::new(Script::new([(0, rot(&x, &y))])), 10_000);
    }
    finish("e_star_demo", engine, x, y, c)
}
