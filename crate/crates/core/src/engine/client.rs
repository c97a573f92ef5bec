//! Closed-loop client driver shared by every engine.
//!
//! The driver owns the operation source, op records and think time; an
//! engine-specific [`ClientProtocol`] turns operations into messages and
//! decides when an operation is finished.

use std::collections::VecDeque;

use crate::storage::VersionId;
use crate::transport::{Actor, Counters, Env, Input, OpDesc, OpInfo, OpRecord, Payload, TimerKind};
use crate::types::{ClientId, Key, NodeId, RotId};
use crate::Result;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClientOp {
    Put { key: Key, value: Vec<u8> },
    Rot { keys: Vec<Key> },
}

/// Where a client's operations come from.
pub trait OpSource: Send {
    /// The next operation and how long to wait before issuing it, or `None`
    /// once the client is done.
    fn next_op(&mut self, now_us: u64) -> Option<(u64, ClientOp)>;
}

/// A fixed list of `(delay before issuing, operation)` pairs.
#[derive(Debug, Clone, Default)]
pub struct Script(pub VecDeque<(u64, ClientOp)>);

impl Script {
    pub fn new(ops: impl IntoIterator<Item = (u64, ClientOp)>) -> Self {
        Script(ops.into_iter().collect())
    }
}

impl OpSource for Script {
    fn next_op(&mut self, _now_us: u64) -> Option<(u64, ClientOp)> {
        self.0.pop_front()
    }
}

/// Engine-specific half of a client.
pub trait ClientProtocol: Send {
    fn start_put(&mut self, env: &mut dyn Env, key: Key, value: Vec<u8>) -> Result<()>;
    fn start_rot(&mut self, env: &mut dyn Env, rot: RotId, keys: &[Key]) -> Result<()>;
    /// Handles a reply. Returns the finished operation's outcome once the
    /// last reply for it arrived.
    fn on_message(&mut self, env: &mut dyn Env, from: NodeId, payload: Payload) -> Result<Option<Outcome>>;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Put(VersionId),
    /// One entry per requested key, in request order.
    Rot(Vec<Option<VersionId>>),
}

pub struct Client<P> {
    id: ClientId,
    proto: P,
    source: Box<dyn OpSource>,
    pending: Option<ClientOp>,
    current: Option<OpInfo>,
    op_seq: u64,
    rot_seq: u32,
    done: bool,
    counters: Counters,
}

impl<P: ClientProtocol> Client<P> {
    pub fn new(id: ClientId, proto: P, source: Box<dyn OpSource>) -> Self {
        Client {
            id,
            proto,
            source,
            pending: None,
            current: None,
            op_seq: 0,
            rot_seq: 0,
            done: false,
            counters: Counters::default(),
        }
    }

    pub fn protocol(&self) -> &P {
        &self.proto
    }

    pub fn protocol_mut(&mut self) -> &mut P {
        &mut self.proto
    }

    fn advance(&mut self, env: &mut dyn Env) -> Result<()> {
        match self.source.next_op(env.now_us()) {
            None => self.done = true,
            Some((0, op)) => self.issue(env, op)?,
            Some((delay, op)) => {
                self.pending = Some(op);
                env.wake_after(delay, TimerKind::NextOp);
            }
        }
        Ok(())
    }

    fn issue(&mut self, env: &mut dyn Env, op: ClientOp) -> Result<()> {
        self.op_seq += 1;
        let desc = match op {
            ClientOp::Put { key, value } => {
                self.proto.start_put(env, key.clone(), value)?;
                self.counters.add("puts", 1);
                OpDesc::Put { key, version: None }
            }
            ClientOp::Rot { keys } => {
                self.rot_seq += 1;
                let rot = RotId { client: self.id, seq: self.rot_seq };
                self.proto.start_rot(env, rot, &keys)?;
                self.counters.add("rots", 1);
                OpDesc::Rot { rot, keys, result: None }
            }
        };
        let info = OpInfo { seq: self.op_seq, desc };
        env.record(OpRecord::Start(info.clone()));
        self.current = Some(info);
        Ok(())
    }

    fn finish(&mut self, env: &mut dyn Env, outcome: Outcome) -> Result<()> {
        let Some(mut info) = self.current.take() else {
            return Ok(());
        };
        match (&mut info.desc, outcome) {
            (OpDesc::Put { version, .. }, Outcome::Put(v)) => *version = Some(v),
            (OpDesc::Rot { result, .. }, Outcome::Rot(r)) => *result = Some(r),
            (desc, outcome) => {
                return Err(crate::Error::Protocol(format!("reply {outcome:?} does not match operation {desc:?}")));
            }
        }
        env.record(OpRecord::End(info));
        self.advance(env)
    }
}

impl<P: ClientProtocol + 'static> Actor for Client<P> {
    fn handle(&mut self, env: &mut dyn Env, input: Input) -> Result<()> {
        match input {
            Input::Start => self.advance(env),
            Input::Timer(TimerKind::NextOp) => match self.pending.take() {
                Some(op) => self.issue(env, op),
                None => Ok(()),
            },
            Input::Timer(_) => Ok(()),
            Input::Message { from, payload } => match self.proto.on_message(env, from, payload)? {
                Some(outcome) => self.finish(env, outcome),
                None => Ok(()),
            },
        }
    }

    fn is_idle(&self) -> bool {
        self.current.is_none() && self.pending.is_none()
    }

    fn counters(&self) -> Counters {
        self.counters.clone()
    }

    fn as_any_mut(&mut self) -> Option<&mut dyn std::any::Any> {
        Some(self)
    }
}

/// Collects per-partition replies of a ROT and reassembles them in request order.
#[derive(Debug, Clone, Default)]
pub struct RotGather {
    pub rot: Option<RotId>,
    pub keys: Vec<Key>,
    pub waiting: usize,
    pub found: std::collections::BTreeMap<Key, Option<VersionId>>,
}

impl RotGather {
    pub fn begin(&mut self, rot: RotId, keys: &[Key], replies: usize) {
        self.rot = Some(rot);
        self.keys = keys.to_vec();
        self.waiting = replies;
        self.found.clear();
    }

    /// Accounts for one reply. Returns the assembled result after the last one.
    pub fn reply(&mut self, rot: RotId, reads: impl IntoIterator<Item = (Key, Option<VersionId>)>) -> Option<Vec<Option<VersionId>>> {
        if self.rot != Some(rot) || self.waiting == 0 {
            return None;
        }
        self.found.extend(reads);
        self.waiting -= 1;
        if self.waiting > 0 {
            return None;
        }
        self.rot = None;
        Some(self.keys.iter().map(|k| self.found.get(k).cloned().flatten()).collect())
    }
}
