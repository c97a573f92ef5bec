//! One-round, one-version, nonblocking ROTs in the COPS-SNOW style.
//!
//! A ROT reads the latest version of each key and leaves its id behind as a
//! reader. A PUT first asks every partition holding one of its dependencies
//! for the ROTs that read an older version there ("old readers"), and stores
//! them with the new version: when such a ROT later reaches this key it reads
//! the version before the new one. Replication runs the same check in the
//! remote DC, combined with a dependency check.
//!
//! Reader times in an old-reader record are always in the holding
//! partition's own timestamp domain: entries learned from a readers check are
//! stored as "just before the new version".

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::client::{ClientProtocol, Outcome, RotGather};
use super::{EngineConfig, EngineKind};
use crate::clock::{HlcState, Timestamp};
use crate::cluster::Topology;
use crate::storage::{PartitionStore, TsVector, Version, VersionId};
use crate::transport::{Actor, Counters, Env, Input, Payload, PutCtx, ReadResult, ReaderEntry, TimerKind};
use crate::types::{ClientId, DcId, Key, NodeId, PartitionId, RotId};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReaderSlot {
    pub seq: u32,
    pub time: Timestamp,
    pub inserted_us: u64,
}

/// Readers of one key, at most one ROT per client.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReaderSet(pub BTreeMap<ClientId, ReaderSlot>);

impl ReaderSet {
    /// Keeps the most recent ROT of each client; for the same ROT keeps the
    /// earliest read time.
    pub fn add(&mut self, rot: RotId, time: Timestamp, inserted_us: u64) {
        let slot = ReaderSlot { seq: rot.seq, time, inserted_us };
        match self.0.get_mut(&rot.client) {
            None => {
                self.0.insert(rot.client, slot);
            }
            Some(s) if s.seq < rot.seq => *s = slot,
            Some(s) if s.seq == rot.seq && time < s.time => {
                s.time = time;
                s.inserted_us = s.inserted_us.min(inserted_us);
            }
            Some(_) => {}
        }
    }

    pub fn get(&self, rot: RotId) -> Option<Timestamp> {
        self.0.get(&rot.client).filter(|s| s.seq == rot.seq).map(|s| s.time)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = ReaderEntry> + '_ {
        self.0.iter().map(|(&client, s)| ReaderEntry { rot: RotId { client, seq: s.seq }, read_time: s.time })
    }

    pub fn merge(&mut self, other: &ReaderSet) {
        for (&client, s) in &other.0 {
            self.add(RotId { client, seq: s.seq }, s.time, s.inserted_us);
        }
    }

    /// Drops entries inserted before `horizon_us`.
    pub fn expire(&mut self, horizon_us: u64) {
        self.0.retain(|_, s| s.inserted_us >= horizon_us);
    }
}

/// A PUT waiting for readers-check responses.
struct PendingPut {
    client: NodeId,
    key: Key,
    value: Vec<u8>,
    client_ts: Timestamp,
    deps: Vec<VersionId>,
    waiting: usize,
    collected: ReaderSet,
}

/// The replicated update at the head of one origin DC's stream.
struct ActiveReplica {
    version: Version,
    local_deps: Vec<VersionId>,
    waiting: usize,
    collected: ReaderSet,
}

#[derive(Default)]
struct ReplicaStream {
    next_seq: u64,
    reorder: BTreeMap<u64, (Version, Vec<VersionId>)>,
    queue: VecDeque<(Version, Vec<VersionId>)>,
    active: Option<(u64, ActiveReplica)>,
}

enum Check {
    Put(PendingPut),
    Replica(DcId),
}

pub struct Partition {
    topo: Topology,
    dc: DcId,
    part: PartitionId,
    /// Old-reader records disabled: reads always return the latest version.
    read_latest: bool,
    reader_gc_us: u64,
    reader_ttl_us: u64,
    pub hlc: HlcState,
    pub store: PartitionStore,
    pub readers: BTreeMap<Key, ReaderSet>,
    pub old_readers: BTreeMap<Key, ReaderSet>,
    checks: BTreeMap<u64, Check>,
    next_check: u64,
    repl_seq: Vec<u64>,
    streams: Vec<ReplicaStream>,
    /// Dependency checks from peers waiting for versions to be installed here.
    held_dep_checks: Vec<(NodeId, u64, Vec<VersionId>)>,
    counters: Counters,
}

impl Partition {
    pub fn new(cfg: &EngineConfig, topo: Topology, dc: DcId, part: PartitionId) -> Self {
        let m = usize::from(topo.dcs());
        Partition {
            topo,
            dc,
            part,
            read_latest: cfg.kind == EngineKind::StrawmanLatest,
            reader_gc_us: cfg.reader_gc_us,
            reader_ttl_us: cfg.reader_ttl_us,
            hlc: HlcState::new(cfg.clock()),
            store: PartitionStore::new(),
            readers: BTreeMap::new(),
            old_readers: BTreeMap::new(),
            checks: BTreeMap::new(),
            next_check: 0,
            repl_seq: vec![0; m],
            streams: (0..m).map(|_| ReplicaStream { next_seq: 1, ..Default::default() }).collect(),
            held_dep_checks: Vec::new(),
            counters: Counters::default(),
        }
    }

    pub fn preload(&mut self, v: Version) {
        self.hlc = HlcState::starting_at(self.hlc.mode(), self.hlc.last_issued().max(v.creation_ts));
        self.store.install(v);
    }

    fn me(&self) -> NodeId {
        NodeId::partition(self.dc, self.part)
    }

    /// Old and current readers of `keys`, compacted per client.
    pub fn readers_of<'a>(&self, keys: impl IntoIterator<Item = &'a Key>) -> ReaderSet {
        let mut out = ReaderSet::default();
        for k in keys {
            for set in [self.old_readers.get(k), self.readers.get(k)].into_iter().flatten() {
                out.merge(set);
            }
        }
        out
    }

    fn split_deps(&self, deps: &[VersionId]) -> (Vec<VersionId>, BTreeMap<PartitionId, Vec<VersionId>>) {
        let mut local = Vec::new();
        let mut remote: BTreeMap<PartitionId, Vec<VersionId>> = BTreeMap::new();
        for d in deps {
            let p = self.topo.locate(&d.key);
            if p == self.part {
                local.push(d.clone());
            } else {
                remote.entry(p).or_default().push(d.clone());
            }
        }
        (local, remote)
    }

    fn read(&mut self, env: &mut dyn Env, from: NodeId, rot: RotId, keys: Vec<Key>) -> Result<()> {
        let now = env.now_us();
        let mut reads = Vec::with_capacity(keys.len());
        for key in keys {
            let version = if self.read_latest {
                self.store.latest(&key).cloned()
            } else {
                match self.old_readers.get(&key).and_then(|r| r.get(rot)) {
                    Some(t) => self.store.read_before(&key, t).cloned(),
                    None => {
                        let t = self.hlc.last_issued();
                        self.readers.entry(key.clone()).or_default().add(rot, t, now);
                        self.store.latest(&key).cloned()
                    }
                }
            };
            reads.push(ReadResult { key, version });
        }
        env.send(from, Payload::RotReply { rot, sv: None, reads })
    }

    fn put(&mut self, env: &mut dyn Env, client: NodeId, key: Key, value: Vec<u8>, client_ts: Timestamp, deps: Vec<VersionId>) -> Result<()> {
        let mut pending =
            PendingPut { client, key, value, client_ts, deps, waiting: 0, collected: ReaderSet::default() };
        if self.read_latest || pending.deps.is_empty() {
            return self.finish_put(env, pending);
        }
        let (local, remote) = self.split_deps(&pending.deps);
        let found = self.readers_of(local.iter().map(|d| &d.key));
        self.counters.add("readers_check_rotids_cumulative", found.len() as u64);
        pending.collected.merge(&found);
        self.next_check += 1;
        let check = self.next_check;
        for (p, ds) in remote {
            let keys: BTreeSet<Key> = ds.into_iter().map(|d| d.key).collect();
            env.send(NodeId::partition(self.dc, p), Payload::ReadersCheckReq { check, keys: keys.into_iter().collect() })?;
            pending.waiting += 1;
        }
        self.counters.add("readers_checks", 1);
        self.counters.add("readers_check_partitions", pending.waiting as u64);
        if pending.waiting > 0 {
            self.checks.insert(check, Check::Put(pending));
            Ok(())
        } else {
            self.finish_put(env, pending)
        }
    }

    fn finish_put(&mut self, env: &mut dyn Env, p: PendingPut) -> Result<()> {
        if !self.read_latest && !p.deps.is_empty() {
            self.counters.add("readers_check_rotids_distinct", p.collected.len() as u64);
        }
        let ts = self.hlc.update_then_tick(env.physical_us(), p.client_ts)?;
        let v = Version::new(p.key, p.value, TsVector::zeros(usize::from(self.topo.dcs())), self.dc, ts);
        let id = v.id();
        for dc in 0..self.topo.dcs() {
            if dc != self.dc {
                self.repl_seq[usize::from(dc)] += 1;
                let seq = self.repl_seq[usize::from(dc)];
                env.send(
                    NodeId::partition(dc, self.part),
                    Payload::Replicate { seq, version: v.clone(), deps: p.deps.clone() },
                )?;
            }
        }
        self.install(env.now_us(), v, &p.collected);
        self.counters.add("puts", 1);
        env.send(p.client, Payload::PutResp { version: id, gss: None })?;
        self.progress(env)
    }

    /// Makes `v` visible. Current readers of the key become old readers if
    /// `v` replaces the latest version; readers learned from a check are
    /// recorded as having read just before `v`.
    fn install(&mut self, now: u64, v: Version, collected: &ReaderSet) {
        let key = v.key.clone();
        let replaces_latest = self.store.latest(&key).is_none_or(|l| l.lww() < v.lww());
        if !self.read_latest {
            if replaces_latest {
                if let Some(current) = self.readers.remove(&key) {
                    self.old_readers.entry(key.clone()).or_default().merge(&current);
                }
            }
            if !collected.is_empty() {
                let before = v.creation_ts.pred();
                let rec = self.old_readers.entry(key.clone()).or_default();
                for (&client, s) in &collected.0 {
                    rec.add(RotId { client, seq: s.seq }, before, now);
                }
            }
        }
        self.store.install(v);
    }

    /// Retries everything that may have been waiting for an installation,
    /// until nothing moves.
    fn progress(&mut self, env: &mut dyn Env) -> Result<()> {
        loop {
            let held = std::mem::take(&mut self.held_dep_checks);
            for (from, check, deps) in held {
                self.answer_dep_check(env, from, check, deps)?;
            }
            let mut moved = false;
            for origin in 0..self.topo.dcs() {
                moved |= self.advance_stream(env, origin)?;
            }
            if !moved {
                return Ok(());
            }
        }
    }

    fn installed(&self, d: &VersionId) -> bool {
        self.store.contains(&d.key, d.ts, d.dc)
    }

    fn answer_dep_check(&mut self, env: &mut dyn Env, from: NodeId, check: u64, deps: Vec<VersionId>) -> Result<()> {
        if deps.iter().all(|d| self.installed(d)) {
            let readers = self.readers_of(deps.iter().map(|d| &d.key)).entries().collect();
            env.send(from, Payload::ReadersCheckResp { check, readers })
        } else {
            self.held_dep_checks.push((from, check, deps));
            Ok(())
        }
    }

    fn receive_replica(&mut self, env: &mut dyn Env, origin: DcId, seq: u64, version: Version, deps: Vec<VersionId>) -> Result<()> {
        let s = &mut self.streams[usize::from(origin)];
        s.reorder.insert(seq, (version, deps));
        while let Some(item) = s.reorder.remove(&s.next_seq) {
            s.next_seq += 1;
            s.queue.push_back(item);
        }
        self.progress(env)
    }

    /// Installs replicated updates from `origin` in order, each after its
    /// dependency and readers checks complete. Returns whether anything
    /// was installed.
    fn advance_stream(&mut self, env: &mut dyn Env, origin: DcId) -> Result<bool> {
        let o = usize::from(origin);
        let mut moved = false;
        loop {
            if self.streams[o].active.is_none() {
                let Some((version, deps)) = self.streams[o].queue.pop_front() else {
                    return Ok(moved);
                };
                let (local, remote) = self.split_deps(&deps);
                self.next_check += 1;
                let check = self.next_check;
                let waiting = remote.len();
                for (p, ds) in remote {
                    env.send(NodeId::partition(self.dc, p), Payload::DepCheck { check, deps: ds })?;
                }
                if waiting > 0 {
                    self.checks.insert(check, Check::Replica(origin));
                    self.counters.add("replica_checks", 1);
                }
                let active = ActiveReplica { version, local_deps: local, waiting, collected: ReaderSet::default() };
                self.streams[o].active = Some((check, active));
            }
            let (_, a) = self.streams[o].active.as_ref().expect("set above");
            if a.waiting > 0 || !a.local_deps.iter().all(|d| self.installed(d)) {
                return Ok(moved);
            }
            let (_, mut a) = self.streams[o].active.take().expect("checked above");
            if !self.read_latest {
                let found = self.readers_of(a.local_deps.iter().map(|d| &d.key));
                a.collected.merge(&found);
            }
            self.hlc.update(env.physical_us(), a.version.creation_ts)?;
            self.install(env.now_us(), a.version, &a.collected);
            moved = true;
        }
    }

    fn on_check_response(&mut self, env: &mut dyn Env, check: u64, readers: Vec<ReaderEntry>) -> Result<()> {
        let now = env.now_us();
        match self.checks.get_mut(&check) {
            Some(Check::Put(p)) => {
                self.counters.add("readers_check_rotids_cumulative", readers.len() as u64);
                for r in readers {
                    p.collected.add(r.rot, r.read_time, now);
                }
                p.waiting -= 1;
                if p.waiting == 0 {
                    let Some(Check::Put(p)) = self.checks.remove(&check) else { unreachable!() };
                    self.finish_put(env, p)?;
                }
                Ok(())
            }
            Some(Check::Replica(origin)) => {
                let origin = *origin;
                let o = usize::from(origin);
                if let Some((c, a)) = self.streams[o].active.as_mut() {
                    if *c == check {
                        for r in readers {
                            a.collected.add(r.rot, r.read_time, now);
                        }
                        a.waiting -= 1;
                        if a.waiting == 0 {
                            self.checks.remove(&check);
                            self.progress(env)?;
                        }
                    }
                }
                Ok(())
            }
            None => Err(Error::Protocol(format!("{} got a response to unknown check {check}", self.me()))),
        }
    }

    fn gc(&mut self, now_us: u64) {
        let horizon = now_us.saturating_sub(self.reader_ttl_us);
        for map in [&mut self.readers, &mut self.old_readers] {
            map.retain(|_, set| {
                set.expire(horizon);
                !set.is_empty()
            });
        }
    }

    /// Drops reader entries older than the configured TTL as of `now_us`.
    pub fn collect_garbage(&mut self, now_us: u64) {
        self.gc(now_us);
    }
}

impl Actor for Partition {
    fn handle(&mut self, env: &mut dyn Env, input: Input) -> Result<()> {
        match input {
            Input::Start => {
                if !self.read_latest {
                    env.set_timer(self.reader_gc_us, TimerKind::ReaderGc)?;
                }
                Ok(())
            }
            Input::Timer(TimerKind::ReaderGc) => {
                self.gc(env.now_us());
                Ok(())
            }
            Input::Timer(_) => Ok(()),
            Input::Message { from, payload } => match payload {
                Payload::CcloRead { rot, keys } => self.read(env, from, rot, keys),
                Payload::PutReq { key, value, ctx: PutCtx::Deps { ts, deps } } => self.put(env, from, key, value, ts, deps),
                Payload::ReadersCheckReq { check, keys } => {
                    let readers = self.readers_of(&keys).entries().collect();
                    env.send(from, Payload::ReadersCheckResp { check, readers })
                }
                Payload::ReadersCheckResp { check, readers } => self.on_check_response(env, check, readers),
                Payload::DepCheck { check, deps } => self.answer_dep_check(env, from, check, deps),
                Payload::Replicate { seq, version, deps } => self.receive_replica(env, from.dc(), seq, version, deps),
                other => Err(Error::Protocol(format!("{} cannot handle {:?} from {from}", self.me(), other.kind()))),
            },
        }
    }

    fn is_idle(&self) -> bool {
        self.checks.is_empty()
            && self.held_dep_checks.is_empty()
            && self.streams.iter().all(|s| s.active.is_none() && s.queue.is_empty() && s.reorder.is_empty())
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

/// Client side: the dependency list since the last PUT and the highest
/// timestamp observed.
pub struct ClientState {
    topo: Topology,
    dc: DcId,
    pub deps: BTreeSet<VersionId>,
    pub highest_ts: Timestamp,
    gather: RotGather,
}

impl ClientState {
    pub fn new(topo: Topology, dc: DcId) -> Self {
        ClientState { topo, dc, deps: BTreeSet::new(), highest_ts: Timestamp::ZERO, gather: RotGather::default() }
    }
}

impl ClientProtocol for ClientState {
    fn start_put(&mut self, env: &mut dyn Env, key: Key, value: Vec<u8>) -> Result<()> {
        let ctx = PutCtx::Deps { ts: self.highest_ts, deps: self.deps.iter().cloned().collect() };
        env.send(self.topo.node(self.dc, &key), Payload::PutReq { key, value, ctx })
    }

    fn start_rot(&mut self, env: &mut dyn Env, rot: RotId, keys: &[Key]) -> Result<()> {
        let mut by_part: BTreeMap<PartitionId, Vec<Key>> = BTreeMap::new();
        for k in keys {
            let v = by_part.entry(self.topo.locate(k)).or_default();
            if !v.contains(k) {
                v.push(k.clone());
            }
        }
        self.gather.begin(rot, keys, by_part.len());
        for (p, keys) in by_part {
            env.send(NodeId::partition(self.dc, p), Payload::CcloRead { rot, keys })?;
        }
        Ok(())
    }

    fn on_message(&mut self, _env: &mut dyn Env, _from: NodeId, payload: Payload) -> Result<Option<Outcome>> {
        match payload {
            Payload::PutResp { version, .. } => {
                self.highest_ts = self.highest_ts.max(version.ts);
                self.deps.clear();
                self.deps.insert(version.clone());
                Ok(Some(Outcome::Put(version)))
            }
            Payload::RotReply { rot, reads, .. } => {
                if self.gather.rot != Some(rot) {
                    return Ok(None);
                }
                let ids: Vec<(Key, Option<VersionId>)> = reads.into_iter().map(|r| (r.key, r.version.map(|v| v.id()))).collect();
                for id in ids.iter().filter_map(|(_, v)| v.clone()) {
                    self.highest_ts = self.highest_ts.max(id.ts);
                    self.deps.insert(id);
                }
                Ok(self.gather.reply(rot, ids).map(Outcome::Rot))
            }
            other => Err(Error::Protocol(format!("client cannot handle {:?}", other.kind()))),
        }
    }
}
