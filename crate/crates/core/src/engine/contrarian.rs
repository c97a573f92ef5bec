//! Nonblocking one-version ROTs over hybrid clocks, with GSS stabilization
//! and asynchronous multi-master replication.
//!
//! The same partition also runs the physical-clock baseline (see
//! [`super::cure`]): the only difference is [`ReadPolicy::WaitForClock`].

use std::collections::BTreeMap;

use super::client::{ClientProtocol, Outcome, RotGather};
use super::{EngineConfig, RotMode};
use crate::clock::{ClockMode, HlcState, Timestamp};
use crate::cluster::Topology;
use crate::storage::{GssVector, PartitionStore, SnapshotVector, TsVector, Version, VersionId, VersionVector};
use crate::transport::{
    Actor, ClientCtx, Counters, Env, Input, Note, Payload, PutCtx, ReadResult, TimerKind,
};
use crate::types::{DcId, Key, NodeId, PartitionId, RotId};
use crate::{Error, Result};

/// What a partition does when a snapshot is ahead of its clock.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReadPolicy {
    /// Move the clock forward and answer at once.
    AdvanceClock,
    /// Wait until the physical clock reaches the snapshot.
    WaitForClock,
}

/// The coordinator's choice of snapshot: local entry from its clock and the
/// client's highest local timestamp, remote entries from its GSS and the
/// client's highest GSS.
pub fn pick_sv(dc: DcId, clock_tick: Timestamp, gss: &GssVector, ctx: &ClientCtx) -> SnapshotVector {
    let mut sv = gss.clone();
    sv.join(&ctx.highest_gss);
    sv.set(dc, clock_tick.max(ctx.highest_local_ts));
    sv
}

/// Remote entries of a new version's dependency vector.
pub fn put_remote_deps(dc: DcId, gss: &GssVector, client_gss: &GssVector) -> TsVector {
    let mut dv = gss.clone();
    dv.join(client_gss);
    dv.set(dc, Timestamp::ZERO);
    dv
}

#[derive(Debug, Clone)]
enum Parked {
    Read { client: NodeId, rot: RotId, keys: Vec<Key>, sv: SnapshotVector, reply_sv: Option<SnapshotVector> },
    Put { client: NodeId, key: Key, value: Vec<u8>, ctx: ClientCtx },
}

#[derive(Debug, Default)]
struct OneAndHalfBuffer {
    /// Client requests waiting for the coordinator's snapshot.
    keys: BTreeMap<RotId, (NodeId, Vec<Key>)>,
    /// Snapshots that arrived before the client's request.
    svs: BTreeMap<RotId, SnapshotVector>,
}

pub struct Partition {
    topo: Topology,
    dc: DcId,
    part: PartitionId,
    policy: ReadPolicy,
    stabilization_us: u64,
    heartbeat_us: Option<u64>,
    pub hlc: HlcState,
    pub vv: VersionVector,
    pub gss: GssVector,
    pub store: PartitionStore,
    peer_vv: BTreeMap<PartitionId, VersionVector>,
    repl_seq: Vec<u64>,
    recv_next: Vec<u64>,
    recv_buf: BTreeMap<(DcId, u64), Payload>,
    put_since_heartbeat: bool,
    buffer: OneAndHalfBuffer,
    parked: BTreeMap<u64, Parked>,
    next_token: u64,
    counters: Counters,
}

impl Partition {
    pub fn new(cfg: &EngineConfig, topo: Topology, dc: DcId, part: PartitionId) -> Self {
        let policy = if cfg.clock() == ClockMode::PurePhysical { ReadPolicy::WaitForClock } else { ReadPolicy::AdvanceClock };
        Self::with_policy(cfg, topo, dc, part, policy)
    }

    pub fn with_policy(cfg: &EngineConfig, topo: Topology, dc: DcId, part: PartitionId, policy: ReadPolicy) -> Self {
        let m = usize::from(topo.dcs());
        Partition {
            topo,
            dc,
            part,
            policy,
            stabilization_us: cfg.stabilization_us,
            heartbeat_us: cfg.heartbeat_us,
            hlc: HlcState::new(cfg.clock()),
            vv: TsVector::zeros(m),
            gss: TsVector::zeros(m),
            store: PartitionStore::new(),
            peer_vv: BTreeMap::new(),
            repl_seq: vec![0; m],
            recv_next: vec![1; m],
            recv_buf: BTreeMap::new(),
            put_since_heartbeat: false,
            buffer: OneAndHalfBuffer::default(),
            parked: BTreeMap::new(),
            next_token: 0,
            counters: Counters::default(),
        }
    }

    /// Installs a version without a client operation, as if it had been
    /// written and stabilized before the run started.
    pub fn preload(&mut self, v: Version) {
        for dc in 0..self.topo.dcs() {
            self.vv.raise(dc, v.dv.get(dc));
            self.gss.raise(dc, v.dv.get(dc));
        }
        self.hlc = HlcState::starting_at(self.hlc.mode(), self.hlc.last_issued().max(v.creation_ts));
        self.store.install(v);
    }

    fn me(&self) -> NodeId {
        NodeId::partition(self.dc, self.part)
    }

    fn on_start(&mut self, env: &mut dyn Env) -> Result<()> {
        if self.topo.dcs() > 1 {
            env.set_timer(self.stabilization_us, TimerKind::Stabilize)?;
            if let Some(hb) = self.heartbeat_us {
                env.set_timer(hb, TimerKind::Heartbeat)?;
            }
        }
        Ok(())
    }

    fn stabilize(&mut self, env: &mut dyn Env) -> Result<()> {
        for peer in self.topo.partition_nodes(self.dc) {
            if peer != self.me() {
                env.send(peer, Payload::StabExchange { vv: self.vv.clone() })?;
            }
        }
        self.recompute_gss();
        Ok(())
    }

    fn recompute_gss(&mut self) {
        if self.peer_vv.len() + 1 < usize::from(self.topo.partitions()) {
            return;
        }
        let mut min = self.vv.clone();
        for vv in self.peer_vv.values() {
            min.meet(vv);
        }
        self.gss.join(&min);
    }

    fn heartbeat(&mut self, env: &mut dyn Env) -> Result<()> {
        if std::mem::take(&mut self.put_since_heartbeat) {
            return Ok(());
        }
        let ts = self.hlc.tick(env.physical_us())?;
        self.vv.raise(self.dc, ts);
        for dc in 0..self.topo.dcs() {
            if dc != self.dc {
                self.repl_seq[usize::from(dc)] += 1;
                let seq = self.repl_seq[usize::from(dc)];
                env.send(NodeId::partition(dc, self.part), Payload::Heartbeat { seq, ts })?;
            }
        }
        self.counters.add("heartbeats", 1);
        Ok(())
    }

    fn park(&mut self, env: &mut dyn Env, target: Timestamp, what: Parked) {
        self.next_token += 1;
        let token = self.next_token;
        self.repark(env, token, target, what);
    }

    fn repark(&mut self, env: &mut dyn Env, token: u64, target: Timestamp, what: Parked) {
        if let Parked::Read { rot, .. } = &what {
            env.note(Note::Blocked { rot: *rot, token });
        }
        let wait = target.physical().saturating_sub(env.physical_us()).max(1);
        self.parked.insert(token, what);
        env.wake_after(wait, TimerKind::Resume { token });
    }

    fn resume(&mut self, env: &mut dyn Env, token: u64) -> Result<()> {
        match self.parked.remove(&token) {
            Some(Parked::Read { client, rot, keys, sv, reply_sv }) => {
                self.serve_read(env, Some(token), client, rot, keys, sv, reply_sv)
            }
            Some(Parked::Put { client, key, value, ctx }) => self.put(env, Some(token), client, key, value, ctx),
            None => Ok(()),
        }
    }

    fn put(&mut self, env: &mut dyn Env, token: Option<u64>, client: NodeId, key: Key, value: Vec<u8>, ctx: ClientCtx) -> Result<()> {
        let phys = env.physical_us();
        let mut dv = put_remote_deps(self.dc, &self.gss, &ctx.highest_gss);
        let floor = ctx.highest_local_ts.max(dv.max_excluding(self.dc));
        if !self.hlc.can_reach(phys, floor) {
            let what = Parked::Put { client, key, value, ctx };
            match token {
                Some(t) => self.repark(env, t, floor, what),
                None => self.park(env, floor, what),
            }
            return Ok(());
        }
        let ts = self.hlc.update_then_tick(phys, floor)?;
        dv.set(self.dc, ts);
        let v = Version::new(key, value, dv, self.dc, ts);
        let id = v.id();
        self.vv.raise(self.dc, ts);
        self.put_since_heartbeat = true;
        for dc in 0..self.topo.dcs() {
            if dc != self.dc {
                self.repl_seq[usize::from(dc)] += 1;
                let seq = self.repl_seq[usize::from(dc)];
                env.send(NodeId::partition(dc, self.part), Payload::Replicate { seq, version: v.clone(), deps: vec![] })?;
            }
        }
        self.store.install(v);
        self.counters.add("puts", 1);
        env.send(client, Payload::PutResp { version: id, gss: Some(self.gss.clone()) })
    }

    fn snapshot(&mut self, env: &mut dyn Env, ctx: &ClientCtx) -> Result<SnapshotVector> {
        let tick = self.hlc.tick(env.physical_us())?;
        Ok(pick_sv(self.dc, tick, &self.gss, ctx))
    }

    #[allow(clippy::too_many_arguments)]
    fn serve_read(
        &mut self,
        env: &mut dyn Env,
        token: Option<u64>,
        client: NodeId,
        rot: RotId,
        keys: Vec<Key>,
        sv: SnapshotVector,
        reply_sv: Option<SnapshotVector>,
    ) -> Result<()> {
        let phys = env.physical_us();
        let local = sv.get(self.dc);
        if self.policy == ReadPolicy::WaitForClock && !self.hlc.can_reach(phys, local) {
            let what = Parked::Read { client, rot, keys, sv, reply_sv };
            match token {
                Some(t) => self.repark(env, t, local, what),
                None => self.park(env, local, what),
            }
            return Ok(());
        }
        self.hlc.update(phys, local)?;
        let reads = keys
            .into_iter()
            .map(|key| {
                let version = self.store.read_at(&key, &sv).cloned();
                ReadResult { key, version }
            })
            .collect();
        self.counters.add("rot_reads", 1);
        env.send(client, Payload::RotReply { rot, sv: reply_sv, reads })
    }

    fn apply_replication(&mut self, env: &mut dyn Env, from: NodeId, payload: Payload) -> Result<()> {
        let origin = from.dc();
        let seq = match &payload {
            Payload::Replicate { seq, .. } | Payload::Heartbeat { seq, .. } => *seq,
            _ => unreachable!("only replication traffic is ordered"),
        };
        self.recv_buf.insert((origin, seq), payload);
        let o = usize::from(origin);
        while let Some(p) = self.recv_buf.remove(&(origin, self.recv_next[o])) {
            self.recv_next[o] += 1;
            match p {
                Payload::Replicate { version, .. } => {
                    self.vv.raise(origin, version.creation_ts);
                    self.store.install(version);
                }
                Payload::Heartbeat { ts, .. } => self.vv.raise(origin, ts),
                _ => {}
            }
        }
        let _ = env;
        Ok(())
    }

    fn on_message(&mut self, env: &mut dyn Env, from: NodeId, payload: Payload) -> Result<()> {
        match payload {
            Payload::PutReq { key, value, ctx: PutCtx::Vector(ctx) } => self.put(env, None, from, key, value, ctx),
            Payload::SnapshotReq { rot, ctx } => {
                let sv = self.snapshot(env, &ctx)?;
                env.send(from, Payload::SnapshotResp { rot, sv })
            }
            Payload::RotRead { rot, keys, sv } => self.serve_read(env, None, from, rot, keys, sv, None),
            Payload::RotStart { rot, keys, coord: Some((ctx, involved)) } => {
                let sv = self.snapshot(env, &ctx)?;
                for p in involved {
                    if p != self.part {
                        env.send(NodeId::partition(self.dc, p), Payload::RotForward { rot, sv: sv.clone() })?;
                    }
                }
                self.serve_read(env, None, from, rot, keys, sv.clone(), Some(sv))
            }
            Payload::RotStart { rot, keys, coord: None } => match self.buffer.svs.remove(&rot) {
                Some(sv) => self.serve_read(env, None, from, rot, keys, sv, None),
                None => {
                    self.buffer.keys.insert(rot, (from, keys));
                    Ok(())
                }
            },
            Payload::RotForward { rot, sv } => match self.buffer.keys.remove(&rot) {
                Some((client, keys)) => self.serve_read(env, None, client, rot, keys, sv, None),
                None => {
                    self.buffer.svs.insert(rot, sv);
                    Ok(())
                }
            },
            Payload::StabExchange { vv } => {
                if let Some(p) = from.part() {
                    self.peer_vv.insert(p, vv);
                }
                self.recompute_gss();
                Ok(())
            }
            p @ (Payload::Replicate { .. } | Payload::Heartbeat { .. }) => self.apply_replication(env, from, p),
            other => Err(Error::Protocol(format!("{} cannot handle {:?} from {from}", self.me(), other.kind()))),
        }
    }
}

impl Actor for Partition {
    fn handle(&mut self, env: &mut dyn Env, input: Input) -> Result<()> {
        match input {
            Input::Start => self.on_start(env),
            Input::Timer(TimerKind::Stabilize) => self.stabilize(env),
            Input::Timer(TimerKind::Heartbeat) => self.heartbeat(env),
            Input::Timer(TimerKind::Resume { token }) => self.resume(env, token),
            Input::Timer(_) => Ok(()),
            Input::Message { from, payload } => self.on_message(env, from, payload),
        }
    }

    fn is_idle(&self) -> bool {
        // Reordered heartbeats are always in the buffer under jittery links; only a
        // held update is outstanding work.
        self.parked.is_empty()
            && self.buffer.keys.is_empty()
            && self.buffer.svs.is_empty()
            && !self.recv_buf.values().any(|p| matches!(p, Payload::Replicate { .. }))
    }

    fn counters(&self) -> Counters {
        self.counters.clone()
    }

    fn final_state(&self) -> Option<Vec<VersionId>> {
        Some(self.store.winners().collect())
    }

    fn as_any_mut(&mut self) -> Option<&mut dyn std::any::Any> {
        Some(self)
    }
}

/// Client side: tracks the highest local timestamp and GSS it has seen.
pub struct ClientState {
    topo: Topology,
    dc: DcId,
    mode: RotMode,
    pub ctx: ClientCtx,
    gather: RotGather,
    pending_reads: BTreeMap<PartitionId, Vec<Key>>,
    /// Snapshots returned by successive ROTs, kept for monotonicity checks.
    pub last_sv: Option<SnapshotVector>,
}

impl ClientState {
    pub fn new(topo: Topology, dc: DcId, mode: RotMode) -> Self {
        let m = usize::from(topo.dcs());
        ClientState {
            topo,
            dc,
            mode,
            ctx: ClientCtx { highest_local_ts: Timestamp::ZERO, highest_gss: TsVector::zeros(m) },
            gather: RotGather::default(),
            pending_reads: BTreeMap::new(),
            last_sv: None,
        }
    }

    fn observe_sv(&mut self, sv: &SnapshotVector) {
        self.ctx.highest_local_ts = self.ctx.highest_local_ts.max(sv.get(self.dc));
        let mut remote = sv.clone();
        remote.set(self.dc, Timestamp::ZERO);
        self.ctx.highest_gss.join(&remote);
        self.last_sv = Some(sv.clone());
    }

    fn group(&self, keys: &[Key]) -> BTreeMap<PartitionId, Vec<Key>> {
        let mut by_part: BTreeMap<PartitionId, Vec<Key>> = BTreeMap::new();
        for k in keys {
            let v = by_part.entry(self.topo.locate(k)).or_default();
            if !v.contains(k) {
                v.push(k.clone());
            }
        }
        by_part
    }

    fn reads(reads: Vec<ReadResult>) -> impl Iterator<Item = (Key, Option<VersionId>)> {
        reads.into_iter().map(|r| (r.key, r.version.map(|v| v.id())))
    }
}

impl ClientProtocol for ClientState {
    fn start_put(&mut self, env: &mut dyn Env, key: Key, value: Vec<u8>) -> Result<()> {
        let dst = self.topo.node(self.dc, &key);
        env.send(dst, Payload::PutReq { key, value, ctx: PutCtx::Vector(self.ctx.clone()) })
    }

    fn start_rot(&mut self, env: &mut dyn Env, rot: RotId, keys: &[Key]) -> Result<()> {
        let by_part = self.group(keys);
        let involved: Vec<PartitionId> = by_part.keys().copied().collect();
        let coord = involved[0];
        self.gather.begin(rot, keys, by_part.len());
        match self.mode {
            RotMode::TwoRound => {
                self.pending_reads = by_part;
                env.send(NodeId::partition(self.dc, coord), Payload::SnapshotReq { rot, ctx: self.ctx.clone() })
            }
            RotMode::OneAndHalf => {
                for (p, keys) in by_part {
                    let c = (p == coord).then(|| (self.ctx.clone(), involved.clone()));
                    env.send(NodeId::partition(self.dc, p), Payload::RotStart { rot, keys, coord: c })?;
                }
                Ok(())
            }
        }
    }

    fn on_message(&mut self, env: &mut dyn Env, _from: NodeId, payload: Payload) -> Result<Option<Outcome>> {
        match payload {
            Payload::PutResp { version, gss } => {
                self.ctx.highest_local_ts = self.ctx.highest_local_ts.max(version.ts);
                if let Some(mut g) = gss {
                    g.set(self.dc, Timestamp::ZERO);
                    self.ctx.highest_gss.join(&g);
                }
                Ok(Some(Outcome::Put(version)))
            }
            Payload::SnapshotResp { rot, sv } => {
                if self.gather.rot != Some(rot) {
                    return Ok(None);
                }
                self.observe_sv(&sv);
                for (p, keys) in std::mem::take(&mut self.pending_reads) {
                    env.send(NodeId::partition(self.dc, p), Payload::RotRead { rot, keys, sv: sv.clone() })?;
                }
                Ok(None)
            }
            Payload::RotReply { rot, sv, reads } => {
                if self.gather.rot == Some(rot) {
                    if let Some(sv) = sv {
                        self.observe_sv(&sv);
                    }
                }
                Ok(self.gather.reply(rot, Self::reads(reads)).map(Outcome::Rot))
            }
            other => Err(Error::Protocol(format!("client cannot handle {:?}", other.kind()))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::EngineKind;
    use crate::transport::OpRecord;
    use proptest::prelude::*;

    fn ts(t: u64) -> Timestamp {
        Timestamp(t)
    }

    fn vector(v: &[u64]) -> TsVector {
        TsVector(v.iter().map(|&t| Timestamp(t)).collect())
    }

    /// Captures everything a handler does.
    #[derive(Default)]
    struct Probe {
        me: Option<NodeId>,
        phys: u64,
        sent: Vec<(NodeId, Payload)>,
        wakes: Vec<(u64, TimerKind)>,
        notes: Vec<Note>,
    }

    impl Env for Probe {
        fn me(&self) -> NodeId {
            self.me.unwrap_or(NodeId::partition(0, 0))
        }
        fn now_us(&self) -> u64 {
            self.phys
        }
        fn physical_us(&self) -> u64 {
            self.phys
        }
        fn send(&mut self, dst: NodeId, payload: Payload) -> Result<()> {
            self.sent.push((dst, payload));
            Ok(())
        }
        fn set_timer(&mut self, _: u64, _: TimerKind) -> Result<()> {
            Ok(())
        }
        fn wake_after(&mut self, d: u64, k: TimerKind) {
            self.wakes.push((d, k));
        }
        fn record(&mut self, _: OpRecord) {}
        fn note(&mut self, n: Note) {
            self.notes.push(n);
        }
    }

    fn logical_partition(dcs: u8, clock: u64) -> Partition {
        let mut cfg = EngineConfig::new(EngineKind::Contrarian);
        cfg.clock_mode = Some(ClockMode::PureLogical);
        let mut p = Partition::new(&cfg, Topology::new(dcs, 2).unwrap(), 0, 0);
        p.hlc = HlcState::starting_at(ClockMode::PureLogical, ts(clock));
        p
    }

    fn ctx(hlt: u64, gss: &[u64]) -> ClientCtx {
        ClientCtx { highest_local_ts: ts(hlt), highest_gss: vector(gss) }
    }

    #[test]
    fn put_after_client_ts_100_gets_101() {
        let mut p = logical_partition(1, 90);
        let mut env = Probe::default();
        let c = NodeId::client(0, 1);
        p.handle(&mut env, Input::Message { from: c, payload: Payload::PutReq { key: "x".into(), value: vec![], ctx: PutCtx::Vector(ctx(100, &[0])) } }).unwrap();
        match &env.sent[0].1 {
            Payload::PutResp { version, .. } => assert_eq!(version.ts, ts(101)),
            other => panic!("{other:?}"),
        }
        assert_eq!(p.vv.get(0), ts(101));
    }

    #[test]
    fn first_put_gets_one() {
        let mut p = logical_partition(1, 0);
        let mut env = Probe::default();
        p.handle(&mut env, Input::Message { from: NodeId::client(0, 1), payload: Payload::PutReq { key: "x".into(), value: vec![], ctx: PutCtx::Vector(ctx(0, &[0])) } }).unwrap();
        assert!(matches!(&env.sent[0].1, Payload::PutResp { version, .. } if version.ts == ts(1)));
    }

    #[test]
    fn put_dv_takes_entrywise_max_of_gss_and_client_gss() {
        let mut p = logical_partition(2, 100);
        p.gss = vector(&[0, 50]);
        let mut env = Probe::default();
        p.handle(&mut env, Input::Message { from: NodeId::client(0, 1), payload: Payload::PutReq { key: "x".into(), value: vec![], ctx: PutCtx::Vector(ctx(0, &[0, 60])) } }).unwrap();
        let v = p.store.latest("x").unwrap();
        assert_eq!(v.dv, vector(&[101, 60]));
        // Replicated to the other DC on the same partition index.
        assert!(env.sent.iter().any(|(d, m)| *d == NodeId::partition(1, 0) && matches!(m, Payload::Replicate { seq: 1, .. })));
    }

    #[test]
    fn single_dc_put_has_one_entry_dv_and_no_replication() {
        let mut p = logical_partition(1, 5);
        let mut env = Probe::default();
        p.handle(&mut env, Input::Message { from: NodeId::client(0, 1), payload: Payload::PutReq { key: "x".into(), value: vec![], ctx: PutCtx::Vector(ctx(0, &[0])) } }).unwrap();
        assert_eq!(p.store.latest("x").unwrap().dv, vector(&[6]));
        assert_eq!(env.sent.len(), 1);
    }

    #[test]
    fn coordinator_snapshot_takes_client_ts() {
        let mut p = logical_partition(1, 90);
        let mut env = Probe::default();
        let rot = RotId { client: 1, seq: 1 };
        p.handle(&mut env, Input::Message { from: NodeId::client(0, 1), payload: Payload::SnapshotReq { rot, ctx: ctx(100, &[0]) } }).unwrap();
        assert!(matches!(&env.sent[0].1, Payload::SnapshotResp { sv, .. } if sv.get(0) == ts(100)));
    }

    #[test]
    fn fresh_snapshot_is_tick_and_gss() {
        let sv = pick_sv(0, ts(7), &vector(&[0, 3]), &ctx(0, &[0, 0]));
        assert_eq!(sv, vector(&[7, 3]));
    }

    #[test]
    fn read_advances_clock_to_snapshot_and_replies_immediately() {
        let mut p = logical_partition(1, 90);
        p.preload(Version::new("x".into(), vec![], vector(&[70]), 0, ts(70)));
        let mut env = Probe::default();
        let rot = RotId { client: 1, seq: 1 };
        p.handle(&mut env, Input::Message { from: NodeId::client(0, 1), payload: Payload::RotRead { rot, keys: vec!["x".into()], sv: vector(&[100]) } }).unwrap();
        assert!(p.hlc.last_issued() >= ts(100));
        match &env.sent[0].1 {
            Payload::RotReply { reads, .. } => assert_eq!(reads[0].version.as_ref().unwrap().creation_ts, ts(70)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn read_below_all_data_returns_bottom() {
        let mut p = logical_partition(1, 0);
        p.preload(Version::new("x".into(), vec![], vector(&[70]), 0, ts(70)));
        let mut env = Probe::default();
        let rot = RotId { client: 1, seq: 1 };
        p.handle(&mut env, Input::Message { from: NodeId::client(0, 1), payload: Payload::RotRead { rot, keys: vec!["x".into(), "nothing".into()], sv: vector(&[10]) } }).unwrap();
        assert!(matches!(&env.sent[0].1, Payload::RotReply { reads, .. } if reads.iter().all(|r| r.version.is_none())));
    }

    #[test]
    fn stabilization_takes_entrywise_min() {
        let cfg = EngineConfig::new(EngineKind::Contrarian);
        let mut p = Partition::new(&cfg, Topology::new(2, 2).unwrap(), 0, 0);
        p.vv = vector(&[10, 20]);
        let mut env = Probe::default();
        p.handle(&mut env, Input::Message { from: NodeId::partition(0, 1), payload: Payload::StabExchange { vv: vector(&[15, 5]) } }).unwrap();
        assert_eq!(p.gss, vector(&[10, 5]));
        // Monotone: a lower exchange later does not move it back.
        p.handle(&mut env, Input::Message { from: NodeId::partition(0, 1), payload: Payload::StabExchange { vv: vector(&[1, 1]) } }).unwrap();
        assert_eq!(p.gss, vector(&[10, 5]));
    }

    #[test]
    fn out_of_order_replication_is_buffered() {
        let cfg = EngineConfig::new(EngineKind::Contrarian);
        let mut p = Partition::new(&cfg, Topology::new(2, 2).unwrap(), 0, 0);
        let mut env = Probe::default();
        let from = NodeId::partition(1, 0);
        let v = |t| Version::new("x".into(), vec![], vector(&[0, t]), 1, ts(t));
        p.handle(&mut env, Input::Message { from, payload: Payload::Replicate { seq: 2, version: v(20), deps: vec![] } }).unwrap();
        assert_eq!(p.vv.get(1), ts(0));
        assert!(!p.is_idle());
        p.handle(&mut env, Input::Message { from, payload: Payload::Replicate { seq: 1, version: v(10), deps: vec![] } }).unwrap();
        assert_eq!(p.vv.get(1), ts(20));
        assert_eq!(p.store.chain("x").unwrap().len(), 2);
        assert!(p.is_idle());
    }

    #[test]
    fn idle_partition_heartbeats_busy_one_does_not() {
        let cfg = EngineConfig::new(EngineKind::Contrarian);
        let mut p = Partition::new(&cfg, Topology::new(2, 2).unwrap(), 0, 0);
        let mut env = Probe { phys: 1_000, ..Default::default() };
        for _ in 0..3 {
            p.handle(&mut env, Input::Timer(TimerKind::Heartbeat)).unwrap();
        }
        assert_eq!(env.sent.iter().filter(|(_, m)| matches!(m, Payload::Heartbeat { .. })).count(), 3);

        let mut q = Partition::new(&cfg, Topology::new(2, 2).unwrap(), 1, 0);
        let mut env2 = Probe::default();
        for (_, m) in env.sent {
            q.handle(&mut env2, Input::Message { from: NodeId::partition(0, 0), payload: m }).unwrap();
        }
        assert_eq!(q.vv.get(0), p.vv.get(0));

        let mut env = Probe { phys: 2_000, ..Default::default() };
        p.handle(&mut env, Input::Message { from: NodeId::client(0, 1), payload: Payload::PutReq { key: "x".into(), value: vec![], ctx: PutCtx::Vector(ctx(0, &[0, 0])) } }).unwrap();
        p.handle(&mut env, Input::Timer(TimerKind::Heartbeat)).unwrap();
        assert!(!env.sent.iter().any(|(_, m)| matches!(m, Payload::Heartbeat { .. })));
    }

    #[test]
    fn one_and_half_buffers_until_both_halves_arrive() {
        let mut p = logical_partition(1, 0);
        p.part = 1;
        let rot = RotId { client: 1, seq: 1 };
        let c = NodeId::client(0, 1);
        let mut env = Probe::default();
        p.handle(&mut env, Input::Message { from: NodeId::partition(0, 0), payload: Payload::RotForward { rot, sv: vector(&[5]) } }).unwrap();
        assert!(env.sent.is_empty());
        p.handle(&mut env, Input::Message { from: c, payload: Payload::RotStart { rot, keys: vec!["y".into()], coord: None } }).unwrap();
        assert_eq!(env.sent.len(), 1);
        assert_eq!(env.sent[0].0, c);
        assert!(p.is_idle());
    }

    proptest! {
        #[test]
        fn snapshot_dominates_inputs(
            tick in 0u64..1000, hlt in 0u64..1000,
            gss in proptest::collection::vec(0u64..1000, 3),
            cg in proptest::collection::vec(0u64..1000, 3),
        ) {
            let g = vector(&gss);
            let c = ctx(hlt, &cg);
            let sv = pick_sv(1, ts(tick), &g, &c);
            prop_assert!(sv.get(1) >= ts(tick) && sv.get(1) >= ts(hlt));
            for dc in [0u8, 2] {
                prop_assert!(sv.get(dc) >= g.get(dc) && sv.get(dc) >= c.highest_gss.get(dc));
                prop_assert_eq!(sv.get(dc), g.get(dc).max(c.highest_gss.get(dc)));
            }
        }
    }
}
