//! Run configuration file.
//!
//! A TOML document whose keys mirror the command-line flags:
//!
//! ```toml
//! engine = "cclo"          # contrarian | cure | cclo | strawman_latest
//! rot_mode = "1.5"         # 1.5 | 2 (contrarian only)
//! w = 0.05
//! p = 4
//! z = 0.99
//! b = 8
//! clients = 16
//! partitions = 8
//! dcs = 2
//! keyspace = 10000
//! seed = 1
//! duration_ms = 1000
//! backend = "sim"          # sim | socket
//! report = "human"         # csv | jsonl | human
//! trace_out = "run.jsonl"  # optional
//! replication_factor = 2   # optional; must equal dcs
//!
//! [delay]
//! law = "adversarial_reorder"
//! lo_us = 50
//! hi_us = 150
//! spike = 10
//! ```

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bench::{ReportFormat, WorkloadConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    #[default]
    Sim,
    Socket,
}

impl FromStr for Backend {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sim" => Ok(Backend::Sim),
            "socket" => Ok(Backend::Socket),
            _ => Err(Error::config(format!("backend must be sim or socket, got {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    #[serde(flatten)]
    pub workload: WorkloadConfig,
    pub backend: Backend,
    pub report: ReportFormat,
    pub trace_out: Option<PathBuf>,
    /// Replicas per key. Every partition lives in every DC, so anything but
    /// `dcs` is rejected.
    pub replication_factor: Option<u8>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let table: toml::Table = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        let known = toml::Table::try_from(WorkloadConfig::default()).map_err(|e| Error::config(e.to_string()))?;
        for k in table.keys() {
            if !known.contains_key(k) && !["backend", "report", "trace_out", "replication_factor"].contains(&k.as_str()) {
                return Err(Error::config(format!("unknown configuration key {k:?}")));
            }
        }
        let cfg: RunConfig = table.try_into().map_err(|e: toml::de::Error| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(r) = self.replication_factor {
            if r != self.workload.dcs {
                return Err(Error::config(format!(
                    "partial replication is not supported: replication_factor {r} with {} DCs",
                    self.workload.dcs
                )));
            }
        }
        if self.backend == Backend::Socket && self.trace_out.is_some() {
            return Err(Error::config("traces are only recorded by the sim backend"));
        }
        self.workload.validate()
    }
}
