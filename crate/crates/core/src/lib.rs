//! A partitioned, optionally geo-replicated, multi-version causally consistent
//! key-value store.
//!
//! Three read-only transaction (ROT) engines share the same storage, clock and
//! transport layers:
//!
//! - [`engine::contrarian`]: nonblocking, one-version ROTs in 1½ or 2 rounds,
//!   hybrid logical-physical clocks and a stabilization protocol.
//! - [`engine::cure`]: the blocking physical-clock coordinator baseline.
//! - [`engine::cclo`]: one-round, one-version, nonblocking ROTs that pay for it
//!   with readers checks on every PUT.
//!
//! Runs execute on a deterministic discrete-event simulator
//! ([`transport::sim`]) or on real TCP sockets ([`transport::socket`]). Every
//! run produces a trace which the [`checker`] analyses offline.

pub mod bench;
pub mod checker;
pub mod clock;
pub mod cluster;
pub mod engine;
pub mod error;
pub mod storage;
pub mod transport;
pub mod types;

pub use error::{Error, Result};
