//! TCP backend: one thread per node, real sockets on localhost.
//!
//! Every node binds a listener, then runs an event loop fed by one reader
//! thread per inbound connection. Each node writes to a peer over a single
//! connection from its own loop, so links are FIFO. Time is wall-clock
//! microseconds since the run started.

use std::collections::{BTreeMap, BinaryHeap};
use std::cmp::Reverse;
use std::io::BufReader;
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::{Arc, Barrier};
use std::thread;
use std::time::{Duration, Instant};

use super::message::{MessageKind, Payload};
use super::sim::{ClockSkew, CompletedOp, KindStats, OpKind};
use super::trace::OpDesc;
use super::wire::{self, Envelope};
use super::{Actor, Env, Input, Note, OpRecord, TimerKind};
use crate::types::NodeId;
use crate::{Error, Result};

/// Pending timer: fire time, tie-break sequence, period, kind.
type TimerEntry = Reverse<(u64, u64, Option<u64>, TimerKind)>;

/// Everything a socket run produces.
pub struct SocketReport {
    pub ops: Vec<CompletedOp>,
    pub messages: BTreeMap<MessageKind, KindStats>,
    pub actors: BTreeMap<NodeId, Box<dyn Actor>>,
}

enum Out {
    Send(NodeId, Payload),
    Timer(u64, Option<u64>, TimerKind),
    Record(OpRecord),
}

struct SockEnv {
    me: NodeId,
    start: Instant,
    skew: ClockSkew,
    out: Vec<Out>,
}

impl Env for SockEnv {
    fn me(&self) -> NodeId {
        self.me
    }
    fn now_us(&self) -> u64 {
        self.start.elapsed().as_micros() as u64
    }
    fn physical_us(&self) -> u64 {
        let now = i128::from(self.now_us());
        (now + i128::from(self.skew.offset_us) + now * i128::from(self.skew.drift_ppm) / 1_000_000).max(0) as u64
    }
    fn send(&mut self, dst: NodeId, payload: Payload) -> Result<()> {
        self.out.push(Out::Send(dst, payload));
        Ok(())
    }
    fn set_timer(&mut self, period_us: u64, kind: TimerKind) -> Result<()> {
        if period_us == 0 {
            return Err(Error::ZeroPeriod);
        }
        self.out.push(Out::Timer(period_us, Some(period_us), kind));
        Ok(())
    }
    fn wake_after(&mut self, delay_us: u64, kind: TimerKind) {
        self.out.push(Out::Timer(delay_us, None, kind));
    }
    fn record(&mut self, rec: OpRecord) {
        self.out.push(Out::Record(rec));
    }
    fn note(&mut self, _note: Note) {}
}

struct NodeResult {
    node: NodeId,
    actor: Box<dyn Actor>,
    ops: Vec<CompletedOp>,
    messages: BTreeMap<MessageKind, KindStats>,
}

/// Runs `actors` over localhost TCP for `duration`, then stops every node.
pub fn run(
    actors: BTreeMap<NodeId, Box<dyn Actor>>,
    skew: &BTreeMap<NodeId, ClockSkew>,
    duration: Duration,
) -> Result<SocketReport> {
    let mut listeners = BTreeMap::new();
    for &node in actors.keys() {
        let l = TcpListener::bind("127.0.0.1:0")?;
        l.set_nonblocking(true)?;
        listeners.insert(node, l);
    }
    let addrs: Arc<BTreeMap<NodeId, SocketAddr>> =
        Arc::new(listeners.iter().map(|(n, l)| Ok((*n, l.local_addr()?))).collect::<Result<_>>()?);
    let stop = Arc::new(AtomicBool::new(false));
    let barrier = Arc::new(Barrier::new(actors.len() + 1));
    let start = Instant::now();
    let mut handles = Vec::new();
    for (node, actor) in actors {
        let listener = listeners.remove(&node).expect("bound above");
        let (tx, rx) = mpsc::channel();
        spawn_acceptor(listener, tx, stop.clone());
        let addrs = addrs.clone();
        let stop = stop.clone();
        let barrier = barrier.clone();
        let skew = skew.get(&node).copied().unwrap_or_default();
        handles.push(thread::spawn(move || {
            barrier.wait();
            node_loop(node, actor, rx, &addrs, &stop, start, skew)
        }));
    }
    barrier.wait();
    thread::sleep(duration);
    stop.store(true, Ordering::SeqCst);
    let mut report = SocketReport { ops: Vec::new(), messages: BTreeMap::new(), actors: BTreeMap::new() };
    let mut first_err = None;
    for h in handles {
        match h.join().map_err(|_| Error::Wire("node thread panicked".into()))? {
            Ok(r) => {
                report.ops.extend(r.ops);
                for (k, s) in r.messages {
                    let e = report.messages.entry(k).or_default();
                    e.messages += s.messages;
                    e.bytes += s.bytes;
                }
                report.actors.insert(r.node, r.actor);
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    match first_err {
        Some(e) => Err(e),
        None => Ok(report),
    }
}

fn spawn_acceptor(listener: TcpListener, tx: Sender<Input>, stop: Arc<AtomicBool>) {
    thread::spawn(move || {
        while !stop.load(Ordering::SeqCst) {
            match listener.accept() {
                Ok((stream, _)) => {
                    let tx = tx.clone();
                    let _ = stream.set_nonblocking(false);
                    thread::spawn(move || {
                        let mut r = BufReader::new(stream);
                        while let Ok(Some(env)) = wire::read_frame(&mut r) {
                            if tx.send(Input::Message { from: env.src, payload: env.payload }).is_err() {
                                break;
                            }
                        }
                    });
                }
                Err(_) => thread::sleep(Duration::from_micros(200)),
            }
        }
    });
}

fn node_loop(
    node: NodeId,
    mut actor: Box<dyn Actor>,
    rx: Receiver<Input>,
    addrs: &BTreeMap<NodeId, SocketAddr>,
    stop: &AtomicBool,
    start: Instant,
    skew: ClockSkew,
) -> Result<NodeResult> {
    let mut conns: BTreeMap<NodeId, TcpStream> = BTreeMap::new();
    let mut timers: BinaryHeap<TimerEntry> = BinaryHeap::new();
    let mut timer_seq = 0u64;
    let mut open: BTreeMap<u64, (u64, OpKind, usize)> = BTreeMap::new();
    let mut res = NodeResult { node, actor: Box::new(Idle), ops: Vec::new(), messages: BTreeMap::new() };
    let mut input = Some(Input::Start);
    while !stop.load(Ordering::SeqCst) {
        let inp = match input.take() {
            Some(i) => i,
            None => {
                let now = start.elapsed().as_micros() as u64;
                if let Some(Reverse((due, _, period, kind))) = timers.peek().copied() {
                    if due <= now {
                        timers.pop();
                        if let Some(p) = period {
                            timer_seq += 1;
                            timers.push(Reverse((due + p, timer_seq, period, kind)));
                        }
                        Input::Timer(kind)
                    } else {
                        match rx.recv_timeout(Duration::from_micros((due - now).min(5_000))) {
                            Ok(i) => i,
                            Err(RecvTimeoutError::Timeout) => continue,
                            Err(RecvTimeoutError::Disconnected) => break,
                        }
                    }
                } else {
                    match rx.recv_timeout(Duration::from_millis(5)) {
                        Ok(i) => i,
                        Err(RecvTimeoutError::Timeout) => continue,
                        Err(RecvTimeoutError::Disconnected) => break,
                    }
                }
            }
        };
        let mut env = SockEnv { me: node, start, skew, out: Vec::new() };
        actor.handle(&mut env, inp)?;
        let now = env.now_us();
        for o in env.out {
            match o {
                Out::Send(dst, payload) => {
                    let addr = addrs.get(&dst).ok_or(Error::UnknownNode(dst))?;
                    if node.is_client() && dst.is_client() {
                        return Err(Error::ClientToClient { src: node, dst });
                    }
                    let stream = match conns.get_mut(&dst) {
                        Some(s) => s,
                        None => {
                            let s = TcpStream::connect(addr)?;
                            s.set_nodelay(true)?;
                            conns.entry(dst).or_insert(s)
                        }
                    };
                    let kind = payload.kind();
                    let env = Envelope { src: node, dst, send_time_us: now, payload };
                    // A peer that already shut down is not an error for us.
                    let bytes = wire::write_frame(stream, &env).unwrap_or(0);
                    let e = res.messages.entry(kind).or_default();
                    e.messages += 1;
                    e.bytes += bytes as u64;
                }
                Out::Timer(delay, period, kind) => {
                    timer_seq += 1;
                    timers.push(Reverse((now + delay, timer_seq, period, kind)));
                }
                Out::Record(OpRecord::Start(info)) => {
                    let (k, n) = match &info.desc {
                        OpDesc::Put { .. } => (OpKind::Put, 1),
                        OpDesc::Rot { keys, .. } => (OpKind::Rot, keys.len()),
                    };
                    open.insert(info.seq, (now, k, n));
                }
                Out::Record(OpRecord::End(info)) => {
                    if let Some((s, k, n)) = open.remove(&info.seq) {
                        res.ops.push(CompletedOp { client: node, kind: k, keys: n, start_us: s, end_us: now });
                    }
                }
            }
        }
    }
    res.actor = actor;
    Ok(res)
}

struct Idle;

impl Actor for Idle {
    fn handle(&mut self, _: &mut dyn Env, _: Input) -> Result<()> {
        Ok(())
    }
}
