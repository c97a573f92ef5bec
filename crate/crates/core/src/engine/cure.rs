//! The blocking physical-clock baseline.
//!
//! Same partition state and two-round coordinator protocol as
//! [`super::contrarian`], but clocks are purely physical. A partition whose
//! clock is behind the snapshot cannot jump forward, so it parks the read and
//! retries when its physical clock should have caught up.

use super::contrarian::{Partition, ReadPolicy};
use super::EngineConfig;
use crate::clock::Timestamp;
use crate::cluster::Topology;
use crate::types::{DcId, PartitionId};

pub fn partition(cfg: &EngineConfig, topo: Topology, dc: DcId, part: PartitionId) -> Partition {
    Partition::with_policy(cfg, topo, dc, part, ReadPolicy::WaitForClock)
}

/// How long a read at snapshot entry `target` must wait on a node whose
/// physical clock reads `physical_us`.
pub fn wait_us(physical_us: u64, target: Timestamp) -> u64 {
    target.physical().saturating_sub(physical_us)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::{ClockMode, HlcState};
    use crate::engine::EngineKind;
    use crate::storage::TsVector;
    use crate::transport::{Actor, Env, Input, Note, OpRecord, Payload, TimerKind};
    use crate::types::{NodeId, RotId};
    use crate::Result;

    #[derive(Default)]
    struct Probe {
        phys: u64,
        sent: Vec<(NodeId, Payload)>,
        wakes: Vec<(u64, TimerKind)>,
        notes: Vec<Note>,
    }

    impl Env for Probe {
        fn me(&self) -> NodeId {
            NodeId::partition(0, 0)
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

    fn sv_at(us: u64) -> TsVector {
        TsVector(vec![Timestamp::new(us, 0)])
    }

    #[test]
    fn wait_is_distance_to_target() {
        assert_eq!(wait_us(8_000, Timestamp::new(10_000, 3)), 2_000);
        assert_eq!(wait_us(12_000, Timestamp::new(10_000, 0)), 0);
    }

    #[test]
    fn read_ahead_of_clock_blocks_then_answers() {
        let cfg = EngineConfig::new(EngineKind::Cure);
        let mut p = partition(&cfg, Topology::new(1, 2).unwrap(), 0, 0);
        assert_eq!(p.hlc.mode(), ClockMode::PurePhysical);
        let rot = RotId { client: 1, seq: 1 };
        let c = NodeId::client(0, 1);
        let mut env = Probe { phys: 8_000, ..Default::default() };
        let read = Payload::RotRead { rot, keys: vec!["x".into()], sv: sv_at(10_000) };
        p.handle(&mut env, Input::Message { from: c, payload: read }).unwrap();
        assert!(env.sent.is_empty(), "must not answer before the clock reaches the snapshot");
        assert_eq!(env.wakes, [(2_000, TimerKind::Resume { token: 1 })]);
        assert_eq!(env.notes, [Note::Blocked { rot, token: 1 }]);
        assert!(!p.is_idle());

        env.phys = 10_000;
        p.handle(&mut env, Input::Timer(TimerKind::Resume { token: 1 })).unwrap();
        assert_eq!(env.sent.len(), 1);
        assert!(p.hlc.last_issued() >= Timestamp::new(10_000, 0));
        assert!(p.is_idle());
    }

    #[test]
    fn early_wake_parks_again() {
        let cfg = EngineConfig::new(EngineKind::Cure);
        let mut p = partition(&cfg, Topology::new(1, 2).unwrap(), 0, 0);
        let rot = RotId { client: 1, seq: 1 };
        let mut env = Probe { phys: 8_000, ..Default::default() };
        p.handle(&mut env, Input::Message { from: NodeId::client(0, 1), payload: Payload::RotRead { rot, keys: vec![], sv: sv_at(10_000) } }).unwrap();
        env.phys = 9_500;
        p.handle(&mut env, Input::Timer(TimerKind::Resume { token: 1 })).unwrap();
        assert!(env.sent.is_empty());
        assert_eq!(env.wakes.last(), Some(&(500, TimerKind::Resume { token: 1 })));
    }

    #[test]
    fn no_skew_means_no_blocking() {
        let cfg = EngineConfig::new(EngineKind::Cure);
        let mut p = partition(&cfg, Topology::new(1, 2).unwrap(), 0, 0);
        p.hlc = HlcState::new(ClockMode::PurePhysical);
        let mut env = Probe { phys: 10_000, ..Default::default() };
        let rot = RotId { client: 1, seq: 1 };
        p.handle(&mut env, Input::Message { from: NodeId::client(0, 1), payload: Payload::RotRead { rot, keys: vec![], sv: sv_at(10_000) } }).unwrap();
        assert_eq!(env.sent.len(), 1);
        assert!(env.wakes.is_empty());
    }
}
