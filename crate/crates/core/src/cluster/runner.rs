//! Wiring engines onto the simulator.

use crate::clock::{HlcState, Timestamp};
use crate::engine::client::Client;
use crate::engine::{cclo, contrarian, EngineConfig, OpSource};
use crate::storage::Version;
use crate::transport::sim::{SimConfig, Simulator};
use crate::transport::{Actor, Note};
use crate::types::{ClientId, DcId, NodeId};
use crate::{Error, Result};

use super::Topology;

/// A simulated deployment: every partition of every DC, plus clients.
pub struct SimCluster {
    pub sim: Simulator,
    pub topo: Topology,
    pub engine: EngineConfig,
}

impl SimCluster {
    pub fn new(topo: Topology, engine: EngineConfig, sim: SimConfig) -> Result<Self> {
        engine.validate()?;
        let mut s = Simulator::new(sim);
        for node in topo.all_partition_nodes() {
            let (dc, part) = (node.dc(), node.part().expect("partition"));
            s.add_actor(node, engine.partition(topo, dc, part), 0);
        }
        Ok(SimCluster { sim: s, topo, engine })
    }

    pub fn add_client(&mut self, dc: DcId, id: ClientId, source: Box<dyn OpSource>, start_at_us: u64) -> NodeId {
        let node = NodeId::client(dc, id);
        self.sim.add_actor(node, self.engine.client(self.topo, dc, id, source), start_at_us);
        node
    }

    fn actor(&mut self, node: NodeId) -> Result<&mut dyn std::any::Any> {
        self.sim
            .actor_mut(node)
            .and_then(|a| a.as_any_mut())
            .ok_or(Error::UnknownNode(node))
    }

    /// Installs `v` on every replica of its key, as part of the initial state.
    pub fn preload(&mut self, v: Version) -> Result<()> {
        for node in self.topo.replicas(&v.key) {
            let a = self.actor(node)?;
            if let Some(p) = a.downcast_mut::<contrarian::Partition>() {
                p.preload(v.clone());
            } else if let Some(p) = a.downcast_mut::<cclo::Partition>() {
                p.preload(v.clone());
            } else {
                return Err(Error::Protocol(format!("{node} is not a partition")));
            }
        }
        let first = self.topo.replicas(&v.key)[0];
        self.sim.note(first, Note::Preload(v.id()));
        Ok(())
    }

    /// Moves a partition's clock to at least `ts`.
    pub fn set_partition_clock(&mut self, node: NodeId, ts: Timestamp) -> Result<()> {
        let a = self.actor(node)?;
        let hlc = if let Some(p) = a.downcast_mut::<contrarian::Partition>() {
            &mut p.hlc
        } else if let Some(p) = a.downcast_mut::<cclo::Partition>() {
            &mut p.hlc
        } else {
            return Err(Error::Protocol(format!("{node} is not a partition")));
        };
        *hlc = HlcState::starting_at(hlc.mode(), hlc.last_issued().max(ts));
        Ok(())
    }

    /// Makes a client behave as if it had already observed timestamp `ts`.
    pub fn set_client_clock(&mut self, node: NodeId, ts: Timestamp) -> Result<()> {
        let a = self.actor(node)?;
        if let Some(c) = a.downcast_mut::<Client<contrarian::ClientState>>() {
            let ctx = &mut c.protocol_mut().ctx;
            ctx.highest_local_ts = ctx.highest_local_ts.max(ts);
        } else if let Some(c) = a.downcast_mut::<Client<cclo::ClientState>>() {
            let p = c.protocol_mut();
            p.highest_ts = p.highest_ts.max(ts);
        } else {
            return Err(Error::Protocol(format!("{node} is not a client")));
        }
        Ok(())
    }

    /// Runs to quiescence and appends the replicas' final states to the trace.
    pub fn finish(&mut self, limit_us: u64) -> Result<()> {
        self.sim.run_until_quiescent(limit_us)?;
        self.sim.record_final_state();
        Ok(())
    }

    pub fn actor_ref(&self, node: NodeId) -> Option<&dyn Actor> {
        self.sim.actors().find(|(n, _)| **n == node).map(|(_, a)| a.as_ref())
    }
}
