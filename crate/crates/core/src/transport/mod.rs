//! Message passing between partitions and clients.
//!
//! Engines are written as [`Actor`]s that react to [`Input`]s and talk to the
//! outside world only through an [`Env`]. Two backends drive them: the
//! deterministic simulator in [`sim`] and TCP sockets in [`socket`].

pub mod message;
pub mod sim;
pub mod socket;
pub mod trace;
pub mod wire;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use message::{ClientCtx, MessageKind, Payload, PutCtx, ReadResult, ReaderEntry};
pub use trace::{OpDesc, OpInfo, TraceEvent};

use crate::storage::VersionId;
use crate::types::{NodeId, RotId};
use crate::Result;

/// Timers an actor can arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimerKind {
    /// Intra-DC version vector exchange.
    Stabilize,
    /// Replica heartbeat when no PUT was processed recently.
    Heartbeat,
    /// Old-reader record garbage collection.
    ReaderGc,
    /// One-shot wake-up of a parked request, identified by a token.
    Resume { token: u64 },
    /// Client think time elapsed.
    NextOp,
}

impl TimerKind {
    pub fn name(&self) -> &'static str {
        match self {
            TimerKind::Stabilize => "stabilize",
            TimerKind::Heartbeat => "heartbeat",
            TimerKind::ReaderGc => "reader_gc",
            TimerKind::Resume { .. } => "resume",
            TimerKind::NextOp => "next_op",
        }
    }
}

#[derive(Debug, Clone)]
pub enum Input {
    /// Delivered once when the node starts.
    Start,
    Message { from: NodeId, payload: Payload },
    Timer(TimerKind),
}

/// A client-visible operation boundary, reported by client actors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum OpRecord {
    Start(OpInfo),
    End(OpInfo),
}

/// Side-channel facts that are not messages, used for metrics and traces.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Note {
    /// A ROT request was parked waiting on the physical clock.
    Blocked { rot: RotId, token: u64 },
    /// A version was installed directly, without a client operation.
    Preload(VersionId),
}

/// What an actor may do while handling an input.
pub trait Env {
    fn me(&self) -> NodeId;
    /// Global time in microseconds (simulated or since backend start).
    fn now_us(&self) -> u64;
    /// This node's physical clock reading in microseconds, including any
    /// configured offset and drift.
    fn physical_us(&self) -> u64;
    fn send(&mut self, dst: NodeId, payload: Payload) -> Result<()>;
    /// Arms a periodic timer. A zero period is rejected.
    fn set_timer(&mut self, period_us: u64, kind: TimerKind) -> Result<()>;
    /// Arms a one-shot timer.
    fn wake_after(&mut self, delay_us: u64, kind: TimerKind);
    fn record(&mut self, rec: OpRecord);
    fn note(&mut self, note: Note);
}

/// Named monotone counters kept by an actor and merged at the end of a run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Counters(pub BTreeMap<String, u64>);

impl Counters {
    pub fn add(&mut self, name: &str, v: u64) {
        if let Some(c) = self.0.get_mut(name) {
            *c += v;
        } else {
            self.0.insert(name.to_owned(), v);
        }
    }

    pub fn get(&self, name: &str) -> u64 {
        self.0.get(name).copied().unwrap_or(0)
    }

    pub fn merge(&mut self, other: &Counters) {
        for (k, v) in &other.0 {
            self.add(k, *v);
        }
    }
}

pub trait Actor: Send {
    fn handle(&mut self, env: &mut dyn Env, input: Input) -> Result<()>;

    /// Whether the actor has no outstanding work: no pending client
    /// operation, no parked or buffered request.
    fn is_idle(&self) -> bool {
        true
    }

    fn counters(&self) -> Counters {
        Counters::default()
    }

    /// LWW winners of every key this actor stores, for convergence checks.
    fn final_state(&self) -> Option<Vec<VersionId>> {
        None
    }

    /// Lets drivers reach engine-specific state (scenario setup, tests).
    fn as_any_mut(&mut self) -> Option<&mut dyn std::any::Any> {
        None
    }
}
