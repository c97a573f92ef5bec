//! ROT engines and the factory that builds their actors.

pub mod cclo;
pub mod client;
pub mod contrarian;
pub mod cure;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::clock::ClockMode;
use crate::cluster::Topology;
use crate::transport::Actor;
use crate::types::{ClientId, DcId, PartitionId};
use crate::{Error, Result};

pub use client::{ClientOp, OpSource, Script};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RotMode {
    /// Client to all partitions, coordinator forwards the snapshot, replies
    /// to the client: 3 communication steps.
    #[default]
    #[serde(rename = "1.5")]
    OneAndHalf,
    /// Client to coordinator and back, then to the partitions and back:
    /// 4 communication steps.
    #[serde(rename = "2")]
    TwoRound,
}

impl FromStr for RotMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1.5" => Ok(RotMode::OneAndHalf),
            "2" => Ok(RotMode::TwoRound),
            _ => Err(Error::config(format!("rot mode must be 1.5 or 2, got {s:?}"))),
        }
    }
}

impl fmt::Display for RotMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RotMode::OneAndHalf => "1.5",
            RotMode::TwoRound => "2",
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineKind {
    /// Nonblocking one-version ROTs over hybrid clocks.
    #[default]
    Contrarian,
    /// Two-round ROTs over physical clocks; reads wait for the clock.
    Cure,
    /// One-round ROTs with old-reader records and readers checks.
    Cclo,
    /// `Cclo` without old-reader records: always reads the latest version.
    /// Not causally consistent; used to show the checker catches it.
    StrawmanLatest,
}

impl FromStr for EngineKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "contrarian" => Ok(EngineKind::Contrarian),
            "cure" => Ok(EngineKind::Cure),
            "cclo" => Ok(EngineKind::Cclo),
            "strawman_latest" | "strawman-latest" => Ok(EngineKind::StrawmanLatest),
            _ => Err(Error::config(format!("unknown engine {s:?}"))),
        }
    }
}

impl fmt::Display for EngineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EngineKind::Contrarian => "contrarian",
            EngineKind::Cure => "cure",
            EngineKind::Cclo => "cclo",
            EngineKind::StrawmanLatest => "strawman_latest",
        })
    }
}

/// Everything needed to build the actors of one engine.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub kind: EngineKind,
    /// Ignored by engines with a fixed round structure.
    pub rot_mode: RotMode,
    /// Overrides the engine's default clock.
    pub clock_mode: Option<ClockMode>,
    pub stabilization_us: u64,
    /// `None` disables heartbeats.
    pub heartbeat_us: Option<u64>,
    pub reader_gc_us: u64,
    /// How old a reader entry must be before GC drops it.
    pub reader_ttl_us: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            kind: EngineKind::Contrarian,
            rot_mode: RotMode::OneAndHalf,
            clock_mode: None,
            stabilization_us: 5_000,
            heartbeat_us: Some(1_000),
            reader_gc_us: 100_000,
            reader_ttl_us: 500_000,
        }
    }
}

impl EngineConfig {
    pub fn new(kind: EngineKind) -> Self {
        EngineConfig { kind, ..Default::default() }
    }

    pub fn with_rot_mode(mut self, mode: RotMode) -> Self {
        self.rot_mode = mode;
        self
    }

    pub fn clock(&self) -> ClockMode {
        self.clock_mode.unwrap_or(match self.kind {
            EngineKind::Cure => ClockMode::PurePhysical,
            _ => ClockMode::Hybrid,
        })
    }

    /// The round structure actually used.
    pub fn effective_rot_mode(&self) -> Option<RotMode> {
        match self.kind {
            EngineKind::Contrarian => Some(self.rot_mode),
            EngineKind::Cure => Some(RotMode::TwoRound),
            EngineKind::Cclo | EngineKind::StrawmanLatest => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.stabilization_us == 0 || self.heartbeat_us == Some(0) || self.reader_gc_us == 0 {
            return Err(Error::ZeroPeriod);
        }
        Ok(())
    }

    pub fn partition(&self, topo: Topology, dc: DcId, part: PartitionId) -> Box<dyn Actor> {
        match self.kind {
            EngineKind::Contrarian => Box::new(contrarian::Partition::new(self, topo, dc, part)),
            EngineKind::Cure => Box::new(cure::partition(self, topo, dc, part)),
            EngineKind::Cclo | EngineKind::StrawmanLatest => Box::new(cclo::Partition::new(self, topo, dc, part)),
        }
    }

    pub fn client(&self, topo: Topology, dc: DcId, id: ClientId, source: Box<dyn OpSource>) -> Box<dyn Actor> {
        match self.kind {
            EngineKind::Contrarian | EngineKind::Cure => {
                let mode = self.effective_rot_mode().unwrap_or_default();
                Box::new(client::Client::new(id, contrarian::ClientState::new(topo, dc, mode), source))
            }
            EngineKind::Cclo | EngineKind::StrawmanLatest => {
                Box::new(client::Client::new(id, cclo::ClientState::new(topo, dc), source))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for k in [EngineKind::Contrarian, EngineKind::Cure, EngineKind::Cclo, EngineKind::StrawmanLatest] {
            assert_eq!(k.to_string().parse::<EngineKind>().unwrap(), k);
        }
        for m in [RotMode::OneAndHalf, RotMode::TwoRound] {
            assert_eq!(m.to_string().parse::<RotMode>().unwrap(), m);
        }
        assert!("3".parse::<RotMode>().is_err());
    }

    #[test]
    fn cure_uses_physical_clock_and_two_rounds() {
        let c = EngineConfig::new(EngineKind::Cure).with_rot_mode(RotMode::OneAndHalf);
        assert_eq!(c.clock(), ClockMode::PurePhysical);
        assert_eq!(c.effective_rot_mode(), Some(RotMode::TwoRound));
    }

    #[test]
    fn zero_periods_rejected() {
        let c = EngineConfig { heartbeat_us: Some(0), ..Default::default() };
        assert!(c.validate().is_err());
    }
}
