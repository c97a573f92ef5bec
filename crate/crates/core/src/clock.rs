//! Logical, physical and hybrid logical-physical clocks.
//!
//! A [`Timestamp`] packs a 48-bit physical reading (microseconds) and a 16-bit
//! logical counter into one `u64`, so vectors of timestamps are fixed width and
//! totally ordered by plain integer comparison.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const LOGICAL_BITS: u32 = 16;
const LOGICAL_MASK: u64 = (1 << LOGICAL_BITS) - 1;
/// Largest representable physical reading.
pub const MAX_PHYSICAL: u64 = (1 << 48) - 1;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Timestamp(pub u64);

impl Timestamp {
    pub const ZERO: Timestamp = Timestamp(0);
    pub const MAX: Timestamp = Timestamp(u64::MAX);

    pub fn new(physical_us: u64, logical: u16) -> Self {
        debug_assert!(physical_us <= MAX_PHYSICAL);
        Timestamp((physical_us << LOGICAL_BITS) | u64::from(logical))
    }

    pub fn physical(self) -> u64 {
        self.0 >> LOGICAL_BITS
    }

    pub fn logical(self) -> u16 {
        (self.0 & LOGICAL_MASK) as u16
    }

    /// The timestamp immediately before this one, saturating at zero.
    pub fn pred(self) -> Self {
        Timestamp(self.0.saturating_sub(1))
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ClockError {
    #[error("logical counter overflow at physical time {physical_us} us")]
    LogicalOverflow { physical_us: u64 },
    #[error("logical clock exhausted")]
    Exhausted,
    #[error("physical clock at {physical_us} us has not reached {target_us} us")]
    PhysicalBehind { physical_us: u64, target_us: u64 },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClockMode {
    /// Hybrid logical-physical clock: max(physical, last + 1), freely
    /// advanced by incoming timestamps.
    #[default]
    Hybrid,
    /// Plain Lamport counter; physical readings are ignored.
    PureLogical,
    /// Physical clock with a tie-breaking counter. It can never be advanced
    /// past the local physical reading, so callers must wait instead.
    PurePhysical,
}

/// Per-node clock state. Owned and mutated by exactly one node.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HlcState {
    last_issued: Timestamp,
    mode: ClockMode,
}

impl HlcState {
    pub fn new(mode: ClockMode) -> Self {
        Self { last_issued: Timestamp::ZERO, mode }
    }

    pub fn starting_at(mode: ClockMode, last_issued: Timestamp) -> Self {
        Self { last_issued, mode }
    }

    pub fn mode(&self) -> ClockMode {
        self.mode
    }

    pub fn last_issued(&self) -> Timestamp {
        self.last_issued
    }

    /// Issues a new timestamp strictly greater than every previously issued
    /// one. Outside pure-logical mode it is also at least the physical reading.
    pub fn tick(&mut self, physical_now_us: u64) -> Result<Timestamp, ClockError> {
        let next = match self.mode {
            ClockMode::PureLogical => {
                Timestamp(self.last_issued.0.checked_add(1).ok_or(ClockError::Exhausted)?)
            }
            ClockMode::Hybrid | ClockMode::PurePhysical => {
                let phys = Timestamp::new(physical_now_us.min(MAX_PHYSICAL), 0);
                if phys > self.last_issued {
                    phys
                } else if self.last_issued.logical() == u16::MAX {
                    return Err(ClockError::LogicalOverflow {
                        physical_us: self.last_issued.physical(),
                    });
                } else {
                    Timestamp(self.last_issued.0 + 1)
                }
            }
        };
        self.last_issued = next;
        Ok(next)
    }

    /// Merges a timestamp carried by a received message. Afterwards
    /// `last_issued >= incoming`; a stale `incoming` leaves the state alone.
    ///
    /// In pure-physical mode the clock cannot jump ahead of the physical
    /// reading: `PhysicalBehind` tells the caller how long to wait.
    pub fn update(&mut self, physical_now_us: u64, incoming: Timestamp) -> Result<Timestamp, ClockError> {
        if self.mode == ClockMode::PurePhysical && incoming.physical() > physical_now_us {
            return Err(ClockError::PhysicalBehind {
                physical_us: physical_now_us,
                target_us: incoming.physical(),
            });
        }
        if incoming > self.last_issued {
            self.last_issued = incoming;
        }
        Ok(self.last_issued)
    }

    /// `update` followed by `tick`: the returned timestamp is strictly greater
    /// than both the previous state and `incoming`.
    pub fn update_then_tick(&mut self, physical_now_us: u64, incoming: Timestamp) -> Result<Timestamp, ClockError> {
        self.update(physical_now_us, incoming)?;
        self.tick(physical_now_us)
    }

    /// Whether `ts` can be merged right now without waiting on the physical clock.
    pub fn can_reach(&self, physical_now_us: u64, ts: Timestamp) -> bool {
        self.mode != ClockMode::PurePhysical || ts.physical() <= physical_now_us
    }
}
