//! Deterministic discrete-event simulator.
//!
//! A single-threaded event loop over a priority queue ordered by
//! `(time, insertion seq)`. All randomness comes from one seeded ChaCha
//! stream consumed in event order, so a seed and a set of actors fully
//! determine the trace.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::message::{MessageKind, Payload};
use super::trace::{digest_hex, EventKind, MsgInfo, OpDesc, TraceEvent};
use super::wire::{self, Envelope};
use super::{Actor, Env, Input, Note, OpRecord, TimerKind};
use crate::types::{NodeId, RotId};
use crate::{Error, Result};

/// How long a message spends on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum DelayLaw {
    Fixed { us: u64 },
    Uniform { lo_us: u64, hi_us: u64 },
    /// Mostly uniform in `[lo, hi]`, but one message in five is held back
    /// for up to `spike` times `hi`, so messages on the same link overtake
    /// each other routinely.
    AdversarialReorder { lo_us: u64, hi_us: u64, spike: u64 },
}

impl DelayLaw {
    /// Largest delay the law can produce.
    pub fn upper_bound_us(&self) -> u64 {
        match *self {
            DelayLaw::Fixed { us } => us,
            DelayLaw::Uniform { lo_us, hi_us } => hi_us.max(lo_us),
            DelayLaw::AdversarialReorder { lo_us, hi_us, spike } => hi_us.max(lo_us).saturating_mul(spike.max(1)),
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> u64 {
        match *self {
            DelayLaw::Fixed { us } => us,
            DelayLaw::Uniform { lo_us, hi_us } => rng.gen_range(lo_us..=hi_us.max(lo_us)),
            DelayLaw::AdversarialReorder { lo_us, hi_us, spike } => {
                let hi = hi_us.max(lo_us);
                if rng.gen_bool(0.2) {
                    rng.gen_range(hi..=hi.saturating_mul(spike.max(1)))
                } else {
                    rng.gen_range(lo_us..=hi)
                }
            }
        }
    }
}

impl Default for DelayLaw {
    fn default() -> Self {
        DelayLaw::Uniform { lo_us: 50, hi_us: 150 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub seed: u64,
    pub law: DelayLaw,
    /// Law for links between data centers; `law` when unset.
    #[serde(default)]
    pub remote: Option<DelayLaw>,
    /// Per-link overrides keyed by `(src, dst)`.
    #[serde(skip)]
    pub overrides: BTreeMap<(NodeId, NodeId), DelayLaw>,
}

impl Schedule {
    pub fn new(seed: u64, law: DelayLaw) -> Self {
        Schedule { seed, law, remote: None, overrides: BTreeMap::new() }
    }

    pub fn with_remote(mut self, law: DelayLaw) -> Self {
        self.remote = Some(law);
        self
    }

    pub fn with_link(mut self, src: NodeId, dst: NodeId, law: DelayLaw) -> Self {
        self.overrides.insert((src, dst), law);
        self
    }

    fn law_for(&self, src: NodeId, dst: NodeId) -> &DelayLaw {
        if let Some(l) = self.overrides.get(&(src, dst)) {
            return l;
        }
        match &self.remote {
            Some(l) if src.dc() != dst.dc() => l,
            _ => &self.law,
        }
    }
}

/// Per-node physical clock distortion.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClockSkew {
    pub offset_us: i64,
    pub drift_ppm: i64,
}

/// Optional CPU model: a node handles one input at a time and each message
/// occupies it for `per_msg_ns + per_byte_ns * bytes`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceModel {
    pub per_msg_ns: u64,
    pub per_byte_ns: u64,
}

impl ServiceModel {
    fn cost_us(&self, bytes: u64) -> u64 {
        (self.per_msg_ns + self.per_byte_ns * bytes).div_ceil(1000)
    }

    fn is_free(&self) -> bool {
        self.per_msg_ns == 0 && self.per_byte_ns == 0
    }
}

#[derive(Debug, Clone, Default)]
pub struct SimConfig {
    pub schedule: Schedule,
    pub skew: BTreeMap<NodeId, ClockSkew>,
    pub service: ServiceModel,
    pub record_trace: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KindStats {
    pub messages: u64,
    pub bytes: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpKind {
    Put,
    Rot,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletedOp {
    pub client: NodeId,
    pub kind: OpKind,
    pub keys: usize,
    pub start_us: u64,
    pub end_us: u64,
}

/// Aggregates kept regardless of whether a full trace is recorded.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SimStats {
    pub messages: BTreeMap<MessageKind, KindStats>,
    pub ops: Vec<CompletedOp>,
    /// Completed physical-clock waits: `(rot, node, waited us)`.
    pub blocks: Vec<(RotId, NodeId, u64)>,
}

enum Body {
    Start(NodeId),
    Deliver { id: u64, src: NodeId, dst: NodeId, payload: Payload, bytes: u64, digest: String },
    Timer { node: NodeId, kind: TimerKind, period: Option<u64> },
}

struct Scheduled {
    time: u64,
    seq: u64,
    body: Body,
}

impl PartialEq for Scheduled {
    fn eq(&self, o: &Self) -> bool {
        (self.time, self.seq) == (o.time, o.seq)
    }
}
impl Eq for Scheduled {}
impl PartialOrd for Scheduled {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Scheduled {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        (self.time, self.seq).cmp(&(o.time, o.seq))
    }
}

enum Output {
    Send(NodeId, Payload),
    Periodic(u64, TimerKind),
    Once(u64, TimerKind),
    Record(OpRecord),
    Note(Note),
}

struct SimEnv {
    me: NodeId,
    now: u64,
    physical: u64,
    out: Vec<Output>,
}

impl Env for SimEnv {
    fn me(&self) -> NodeId {
        self.me
    }
    fn now_us(&self) -> u64 {
        self.now
    }
    fn physical_us(&self) -> u64 {
        self.physical
    }
    fn send(&mut self, dst: NodeId, payload: Payload) -> Result<()> {
        self.out.push(Output::Send(dst, payload));
        Ok(())
    }
    fn set_timer(&mut self, period_us: u64, kind: TimerKind) -> Result<()> {
        if period_us == 0 {
            return Err(Error::ZeroPeriod);
        }
        self.out.push(Output::Periodic(period_us, kind));
        Ok(())
    }
    fn wake_after(&mut self, delay_us: u64, kind: TimerKind) {
        self.out.push(Output::Once(delay_us, kind));
    }
    fn record(&mut self, rec: OpRecord) {
        self.out.push(Output::Record(rec));
    }
    fn note(&mut self, note: Note) {
        self.out.push(Output::Note(note));
    }
}

pub struct Simulator {
    cfg: SimConfig,
    rng: ChaCha8Rng,
    now: u64,
    seq: u64,
    step: u64,
    next_msg: u64,
    queue: BinaryHeap<Reverse<Scheduled>>,
    actors: BTreeMap<NodeId, Box<dyn Actor>>,
    busy_until: BTreeMap<NodeId, u64>,
    /// Messages other than background traffic, one-shot timers and pending
    /// starts.
    in_flight: usize,
    trace: Vec<TraceEvent>,
    stats: SimStats,
    open_ops: BTreeMap<(NodeId, u64), (u64, OpKind, usize)>,
    parked: BTreeMap<(NodeId, u64), (RotId, u64)>,
}

impl Simulator {
    pub fn new(cfg: SimConfig) -> Self {
        let rng = ChaCha8Rng::seed_from_u64(cfg.schedule.seed);
        Simulator {
            cfg,
            rng,
            now: 0,
            seq: 0,
            step: 0,
            next_msg: 0,
            queue: BinaryHeap::new(),
            actors: BTreeMap::new(),
            busy_until: BTreeMap::new(),
            in_flight: 0,
            trace: Vec::new(),
            stats: SimStats::default(),
            open_ops: BTreeMap::new(),
            parked: BTreeMap::new(),
        }
    }

    pub fn now_us(&self) -> u64 {
        self.now
    }

    /// Registers an actor; it receives [`Input::Start`] at `start_at_us`.
    pub fn add_actor(&mut self, node: NodeId, actor: Box<dyn Actor>, start_at_us: u64) {
        self.actors.insert(node, actor);
        self.in_flight += 1;
        self.push(start_at_us.max(self.now), Body::Start(node));
    }

    pub fn actor_mut(&mut self, node: NodeId) -> Option<&mut Box<dyn Actor>> {
        self.actors.get_mut(&node)
    }

    pub fn actors(&self) -> impl Iterator<Item = (&NodeId, &Box<dyn Actor>)> {
        self.actors.iter()
    }

    pub fn trace(&self) -> &[TraceEvent] {
        &self.trace
    }

    pub fn take_trace(&mut self) -> Vec<TraceEvent> {
        std::mem::take(&mut self.trace)
    }

    pub fn stats(&self) -> &SimStats {
        &self.stats
    }

    pub fn physical_us(&self, node: NodeId) -> u64 {
        physical_reading(self.now, self.cfg.skew.get(&node).copied().unwrap_or_default())
    }

    /// Records an out-of-band fact (used for preloaded data).
    pub fn note(&mut self, node: NodeId, note: Note) {
        self.step += 1;
        let step = self.step;
        self.emit_note(node, step, note);
    }

    fn push(&mut self, time: u64, body: Body) {
        self.seq += 1;
        self.queue.push(Reverse(Scheduled { time, seq: self.seq, body }));
    }

    fn trace_event(&mut self, step: u64, node: NodeId, kind: EventKind) -> Option<&mut TraceEvent> {
        if !self.cfg.record_trace {
            return None;
        }
        let seq = self.trace.len() as u64;
        self.trace.push(TraceEvent::new(seq, self.now, step, node, kind));
        self.trace.last_mut()
    }

    /// Processes the next event. Returns `false` when the queue is empty.
    pub fn step(&mut self) -> Result<bool> {
        let Some(Reverse(ev)) = self.queue.pop() else {
            return Ok(false);
        };
        debug_assert!(ev.time >= self.now);
        self.now = ev.time;
        let node = match &ev.body {
            Body::Start(n) => *n,
            Body::Deliver { dst, .. } => *dst,
            Body::Timer { node, .. } => *node,
        };
        // A busy node defers the input until it is free.
        if let Some(&busy) = self.busy_until.get(&node) {
            if busy > self.now {
                self.push(busy, ev.body);
                return Ok(true);
            }
        }
        self.step += 1;
        let step = self.step;
        let input = match ev.body {
            Body::Start(n) => {
                self.in_flight -= 1;
                if let Some(e) = self.trace_event(step, n, EventKind::Timer) {
                    e.timer = Some(TimerKind::NextOp);
                }
                Input::Start
            }
            Body::Deliver { id, src, dst, payload, bytes, digest } => {
                if !payload.kind().is_background() {
                    self.in_flight -= 1;
                }
                if !self.cfg.service.is_free() {
                    let cost = self.cfg.service.cost_us(bytes);
                    self.busy_until.insert(dst, self.now + cost);
                }
                if let Some(e) = self.trace_event(step, dst, EventKind::MsgDeliver) {
                    e.digest = digest;
                    e.bytes = bytes;
                    e.msg = Some(msg_info(id, src, dst, &payload));
                }
                Input::Message { from: src, payload }
            }
            Body::Timer { node, kind, period } => {
                match period {
                    Some(p) => self.push(self.now + p, Body::Timer { node, kind, period }),
                    None => self.in_flight -= 1,
                }
                if let TimerKind::Resume { token } = kind {
                    if let Some((rot, since)) = self.parked.remove(&(node, token)) {
                        self.stats.blocks.push((rot, node, self.now - since));
                    }
                }
                if let Some(e) = self.trace_event(step, node, EventKind::Timer) {
                    e.timer = Some(kind);
                }
                Input::Timer(kind)
            }
        };
        let Some(mut actor) = self.actors.remove(&node) else {
            return Err(Error::UnknownNode(node));
        };
        let mut env = SimEnv { me: node, now: self.now, physical: self.physical_us(node), out: Vec::new() };
        let res = actor.handle(&mut env, input);
        self.actors.insert(node, actor);
        res?;
        for out in env.out {
            self.apply(node, step, out)?;
        }
        Ok(true)
    }

    fn apply(&mut self, node: NodeId, step: u64, out: Output) -> Result<()> {
        match out {
            Output::Send(dst, payload) => self.send(node, dst, payload, step)?,
            Output::Periodic(p, kind) => self.push(self.now + p, Body::Timer { node, kind, period: Some(p) }),
            Output::Once(d, kind) => {
                self.in_flight += 1;
                self.push(self.now + d, Body::Timer { node, kind, period: None });
            }
            Output::Record(rec) => self.record(node, step, rec),
            Output::Note(note) => self.emit_note(node, step, note),
        }
        Ok(())
    }

    fn send(&mut self, src: NodeId, dst: NodeId, payload: Payload, step: u64) -> Result<()> {
        if !self.actors.contains_key(&dst) {
            return Err(Error::UnknownNode(dst));
        }
        if src.is_client() && dst.is_client() {
            return Err(Error::ClientToClient { src, dst });
        }
        let env = Envelope { src, dst, send_time_us: self.now, payload };
        let frame = wire::encode(&env);
        let bytes = frame.len() as u64;
        let digest = if self.cfg.record_trace { digest_hex(&frame[wire::FRAME_OVERHEAD..]) } else { String::new() };
        let kind = env.payload.kind();
        let s = self.stats.messages.entry(kind).or_default();
        s.messages += 1;
        s.bytes += bytes;
        self.next_msg += 1;
        let id = self.next_msg;
        let delay = self.cfg.schedule.law_for(src, dst).draw(&mut self.rng);
        if let Some(e) = self.trace_event(step, src, EventKind::MsgSend) {
            e.digest = digest.clone();
            e.bytes = bytes;
            e.msg = Some(msg_info(id, src, dst, &env.payload));
        }
        if !kind.is_background() {
            self.in_flight += 1;
        }
        self.push(self.now + delay, Body::Deliver { id, src, dst, payload: env.payload, bytes, digest });
        Ok(())
    }

    fn record(&mut self, node: NodeId, step: u64, rec: OpRecord) {
        let (kind, info) = match rec {
            OpRecord::Start(info) => {
                let (k, n) = match &info.desc {
                    OpDesc::Put { .. } => (OpKind::Put, 1),
                    OpDesc::Rot { keys, .. } => (OpKind::Rot, keys.len()),
                };
                self.open_ops.insert((node, info.seq), (self.now, k, n));
                (EventKind::OpStart, info)
            }
            OpRecord::End(info) => {
                if let Some((start, k, n)) = self.open_ops.remove(&(node, info.seq)) {
                    self.stats.ops.push(CompletedOp { client: node, kind: k, keys: n, start_us: start, end_us: self.now });
                }
                (EventKind::OpEnd, info)
            }
        };
        if let Some(e) = self.trace_event(step, node, kind) {
            e.op = Some(info);
        }
    }

    fn emit_note(&mut self, node: NodeId, step: u64, note: Note) {
        if let Note::Blocked { rot, token } = &note {
            self.parked.entry((node, *token)).or_insert((*rot, self.now));
        }
        if let Some(e) = self.trace_event(step, node, EventKind::Note) {
            e.note = Some(note);
        }
    }

    /// Runs every event scheduled at or before `t`, then advances the clock to `t`.
    pub fn run_until(&mut self, t: u64) -> Result<()> {
        while self.queue.peek().is_some_and(|Reverse(e)| e.time <= t) {
            self.step()?;
        }
        self.now = self.now.max(t);
        Ok(())
    }

    fn quiescent(&self) -> bool {
        self.in_flight == 0 && self.actors.values().all(|a| a.is_idle())
    }

    /// Runs until nothing but periodic timers remains and every actor is
    /// idle, or until `limit_us`. Hitting the limit with unfinished client
    /// operations is a liveness failure.
    pub fn run_until_quiescent(&mut self, limit_us: u64) -> Result<()> {
        loop {
            if self.in_flight == 0 && self.quiescent() {
                return Ok(());
            }
            match self.queue.peek() {
                Some(Reverse(e)) if e.time <= limit_us => {
                    self.step()?;
                }
                _ => {
                    self.now = self.now.max(limit_us);
                    let pending = self.open_ops.len();
                    if pending > 0 {
                        return Err(Error::Liveness { pending, limit_us });
                    }
                    return Ok(());
                }
            }
        }
    }

    /// Appends one `final_state` event per storage node.
    pub fn record_final_state(&mut self) {
        self.step += 1;
        let step = self.step;
        let states: Vec<_> = self.actors.iter().filter_map(|(n, a)| a.final_state().map(|s| (*n, s))).collect();
        for (n, s) in states {
            if let Some(e) = self.trace_event(step, n, EventKind::FinalState) {
                e.state = Some(s);
            }
        }
    }

    pub fn pending_ops(&self) -> usize {
        self.open_ops.len()
    }
}

fn physical_reading(now: u64, skew: ClockSkew) -> u64 {
    let now = i128::from(now);
    let v = now + i128::from(skew.offset_us) + now * i128::from(skew.drift_ppm) / 1_000_000;
    v.max(0) as u64
}

fn msg_info(id: u64, src: NodeId, dst: NodeId, p: &Payload) -> MsgInfo {
    MsgInfo {
        id,
        src,
        dst,
        kind: p.kind(),
        rot: p.rot(),
        keys: p.requested_keys() as u32,
        versions: p.returned_versions() as u32,
        readers: p.reader_ids() as u32,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::trace::to_jsonl;

    /// Sends numbered readers checks to a peer and optionally fires a periodic timer.
    struct Echo {
        peer: Option<NodeId>,
        sends: u32,
        period: u64,
        fired: Vec<u64>,
    }

    impl Actor for Echo {
        fn handle(&mut self, env: &mut dyn Env, input: Input) -> Result<()> {
            match input {
                Input::Start => {
                    if self.period > 0 {
                        env.set_timer(self.period, TimerKind::Stabilize)?;
                    }
                    if let Some(p) = self.peer {
                        for i in 0..self.sends {
                            env.send(p, Payload::ReadersCheckReq { check: u64::from(i), keys: vec![] })?;
                        }
                    }
                }
                Input::Timer(_) => self.fired.push(env.now_us()),
                Input::Message { .. } => {}
            }
            Ok(())
        }
    }

    fn echo(peer: Option<NodeId>, sends: u32) -> Box<Echo> {
        Box::new(Echo { peer, sends, period: 0, fired: vec![] })
    }

    fn cfg(seed: u64, law: DelayLaw) -> SimConfig {
        SimConfig { schedule: Schedule::new(seed, law), record_trace: true, ..Default::default() }
    }

    #[test]
    fn empty_system_has_empty_trace() {
        let mut sim = Simulator::new(cfg(1, DelayLaw::default()));
        sim.run_until_quiescent(1_000).unwrap();
        assert!(sim.trace().is_empty());
    }

    #[test]
    fn fixed_delay_delivers_after_one_ms() {
        let a = NodeId::partition(0, 0);
        let b = NodeId::partition(0, 1);
        let mut sim = Simulator::new(cfg(1, DelayLaw::Fixed { us: 1_000 }));
        sim.add_actor(a, echo(Some(b), 1), 0);
        sim.add_actor(b, echo(None, 0), 0);
        sim.run_until_quiescent(10_000).unwrap();
        let d: Vec<_> = sim.trace().iter().filter(|e| e.kind == EventKind::MsgDeliver).collect();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].time, 1_000);
    }

    #[test]
    fn adversarial_law_reorders_a_link() {
        let a = NodeId::partition(0, 0);
        let b = NodeId::partition(0, 1);
        let mut sim = Simulator::new(cfg(3, DelayLaw::AdversarialReorder { lo_us: 10, hi_us: 100, spike: 20 }));
        sim.add_actor(a, echo(Some(b), 50), 0);
        sim.add_actor(b, echo(None, 0), 0);
        sim.run_until_quiescent(1_000_000).unwrap();
        let ids: Vec<u64> = sim
            .trace()
            .iter()
            .filter(|e| e.kind == EventKind::MsgDeliver)
            .map(|e| e.msg.as_ref().unwrap().id)
            .collect();
        assert_eq!(ids.len(), 50, "exactly-once delivery");
        assert!(ids.windows(2).any(|w| w[0] > w[1]), "expected some overtaking");
    }

    #[test]
    fn same_seed_same_trace() {
        let run = |seed| {
            let a = NodeId::partition(0, 0);
            let b = NodeId::partition(0, 1);
            let mut sim = Simulator::new(cfg(seed, DelayLaw::AdversarialReorder { lo_us: 10, hi_us: 100, spike: 20 }));
            sim.add_actor(a, echo(Some(b), 30), 0);
            sim.add_actor(b, echo(Some(a), 30), 0);
            sim.run_until_quiescent(1_000_000).unwrap();
            to_jsonl(sim.trace())
        };
        assert_eq!(run(9), run(9));
        assert_ne!(run(9), run(10));
    }

    #[test]
    fn periodic_timer_fires_every_period() {
        let a = NodeId::partition(0, 0);
        let mut sim = Simulator::new(cfg(1, DelayLaw::default()));
        sim.add_actor(a, Box::new(Echo { peer: None, sends: 0, period: 5_000, fired: vec![] }), 0);
        sim.run_until(15_000).unwrap();
        let fired: Vec<u64> = sim
            .trace()
            .iter()
            .filter(|e| e.timer == Some(TimerKind::Stabilize))
            .map(|e| e.time)
            .collect();
        assert_eq!(fired, [5_000, 10_000, 15_000]);
    }

    /// Sends a heartbeat to a peer on every timer tick.
    struct Beacon(NodeId);

    impl Actor for Beacon {
        fn handle(&mut self, env: &mut dyn Env, input: Input) -> Result<()> {
            match input {
                Input::Start => env.set_timer(1_000, TimerKind::Heartbeat),
                Input::Timer(_) => {
                    env.send(self.0, Payload::Heartbeat { seq: 0, ts: crate::clock::Timestamp(0) })
                }
                Input::Message { .. } => Ok(()),
            }
        }
    }

    #[test]
    fn background_traffic_does_not_prevent_quiescence() {
        let a = NodeId::partition(0, 0);
        let b = NodeId::partition(1, 0);
        let mut sim = Simulator::new(cfg(1, DelayLaw::Fixed { us: 5_000 }));
        sim.add_actor(a, Box::new(Beacon(b)), 0);
        sim.add_actor(b, Box::new(Beacon(a)), 0);
        sim.run_until(20_000).unwrap();
        sim.run_until_quiescent(1_000_000).unwrap();
        assert!(sim.now_us() < 21_000);
    }

    #[test]
    fn zero_period_rejected() {
        let a = NodeId::partition(0, 0);
        let mut sim = Simulator::new(cfg(1, DelayLaw::default()));
        sim.add_actor(a, Box::new(Echo { peer: None, sends: 0, period: 0, fired: vec![] }), 0);
        let mut env = SimEnv { me: a, now: 0, physical: 0, out: vec![] };
        assert!(matches!(env.set_timer(0, TimerKind::Heartbeat), Err(Error::ZeroPeriod)));
    }

    #[test]
    fn routing_errors() {
        let c1 = NodeId::client(0, 1);
        let c2 = NodeId::client(0, 2);
        let mut sim = Simulator::new(cfg(1, DelayLaw::default()));
        sim.add_actor(c1, echo(Some(c2), 1), 0);
        sim.add_actor(c2, echo(None, 0), 0);
        assert!(matches!(sim.run_until_quiescent(1_000), Err(Error::ClientToClient { .. })));

        let mut sim = Simulator::new(cfg(1, DelayLaw::default()));
        sim.add_actor(c1, echo(Some(NodeId::partition(0, 9)), 1), 0);
        assert!(matches!(sim.run_until_quiescent(1_000), Err(Error::UnknownNode(_))));
    }

    #[test]
    fn skewed_physical_clock() {
        assert_eq!(physical_reading(1_000, ClockSkew { offset_us: -2_000, drift_ppm: 0 }), 0);
        assert_eq!(physical_reading(10_000, ClockSkew { offset_us: 2_000, drift_ppm: 0 }), 12_000);
        assert_eq!(physical_reading(1_000_000, ClockSkew { offset_us: 0, drift_ppm: 100 }), 1_000_100);
    }

    #[test]
    fn busy_node_defers_input() {
        let a = NodeId::partition(0, 0);
        let b = NodeId::partition(0, 1);
        let mut c = cfg(1, DelayLaw::Fixed { us: 10 });
        c.service = ServiceModel { per_msg_ns: 5_000, per_byte_ns: 0 };
        let mut sim = Simulator::new(c);
        sim.add_actor(a, echo(Some(b), 3), 0);
        sim.add_actor(b, echo(None, 0), 0);
        sim.run_until_quiescent(1_000).unwrap();
        let times: Vec<u64> = sim.trace().iter().filter(|e| e.kind == EventKind::MsgDeliver).map(|e| e.time).collect();
        assert_eq!(times, [10, 15, 20]);
    }
}
