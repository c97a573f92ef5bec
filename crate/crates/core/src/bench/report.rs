//! Stable-schema output of run metrics.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::metrics::Metrics;
use crate::transport::MessageKind;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Csv,
    Jsonl,
    #[default]
    Human,
}

impl FromStr for ReportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "jsonl" => Ok(ReportFormat::Jsonl),
            "human" => Ok(ReportFormat::Human),
            _ => Err(Error::config(format!("report format must be csv, jsonl or human, got {s:?}"))),
        }
    }
}

const SCALAR_COLUMNS: [&str; 28] = [
    "engine",
    "rot_mode",
    "dcs",
    "partitions",
    "clients",
    "w",
    "p",
    "z",
    "b",
    "seed",
    "duration_ms",
    "puts",
    "rots",
    "reads",
    "throughput_ops_s",
    "rot_latency_mean_us",
    "rot_latency_p99_us",
    "put_latency_mean_us",
    "realized_write_ratio",
    "messages",
    "bytes",
    "bytes_per_put",
    "readers_checks",
    "readers_check_partitions",
    "rotids_per_check",
    "distinct_rotids_per_check",
    "blocked_rots",
    "blocking_us_total",
];

/// CSV header: the scalar metrics, then message and byte counts per kind.
pub fn csv_columns() -> Vec<String> {
    let mut cols: Vec<String> = SCALAR_COLUMNS.iter().map(|s| s.to_string()).collect();
    for k in MessageKind::ALL {
        cols.push(format!("msgs_{}", k.name()));
        cols.push(format!("bytes_{}", k.name()));
    }
    cols
}

fn csv_row(m: &Metrics) -> Vec<String> {
    let mut row = vec![
        m.engine.clone(),
        m.rot_mode.clone(),
        m.dcs.to_string(),
        m.partitions.to_string(),
        m.clients.to_string(),
        m.w.to_string(),
        m.p.to_string(),
        m.z.to_string(),
        m.b.to_string(),
        m.seed.to_string(),
        m.duration_ms.to_string(),
        m.puts.to_string(),
        m.rots.to_string(),
        m.reads.to_string(),
        format!("{:.3}", m.throughput_ops_s),
        format!("{:.3}", m.rot_latency_mean_us),
        m.rot_latency_p99_us.to_string(),
        format!("{:.3}", m.put_latency_mean_us),
        format!("{:.6}", m.realized_write_ratio),
        m.messages.to_string(),
        m.bytes.to_string(),
        format!("{:.3}", m.bytes_per_put),
        m.readers_checks.to_string(),
        m.readers_check_partitions.to_string(),
        format!("{:.3}", m.rotids_per_check),
        format!("{:.3}", m.distinct_rotids_per_check),
        m.blocked_rots.to_string(),
        m.blocking_us_total.to_string(),
    ];
    for k in MessageKind::ALL {
        let s = m.kind(k);
        row.push(s.messages.to_string());
        row.push(s.bytes.to_string());
    }
    row
}

pub fn report(rows: &[Metrics], format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let werr = |e: csv::Error| Error::Protocol(format!("csv: {e}"));
            w.write_record(csv_columns()).map_err(werr)?;
            for m in rows {
                w.write_record(csv_row(m)).map_err(werr)?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Protocol(format!("csv: {e}")))?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
        ReportFormat::Jsonl => {
            let mut out = String::new();
            for m in rows {
                out.push_str(&serde_json::to_string(m)?);
                out.push('\n');
            }
            Ok(out)
        }
        ReportFormat::Human => Ok(rows.iter().map(human).collect::<Vec<_>>().join("\n")),
    }
}

fn human(m: &Metrics) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{} (rot mode {}), {} DC x {} partitions, {} clients, w={} p={} z={} b={}, seed {}, {} ms",
        m.engine, m.rot_mode, m.dcs, m.partitions, m.clients, m.w, m.p, m.z, m.b, m.seed, m.duration_ms
    );
    let _ = writeln!(s, "  throughput      {:.1} ops/s ({} PUTs, {} ROTs)", m.throughput_ops_s, m.puts, m.rots);
    let _ = writeln!(s, "  ROT latency     mean {:.1} us, p99 {} us", m.rot_latency_mean_us, m.rot_latency_p99_us);
    let _ = writeln!(s, "  PUT latency     mean {:.1} us", m.put_latency_mean_us);
    let _ = writeln!(s, "  write ratio     {:.4}", m.realized_write_ratio);
    let _ = writeln!(s, "  traffic         {} messages, {} bytes, {:.1} bytes per PUT", m.messages, m.bytes, m.bytes_per_put);
    if m.readers_checks > 0 {
        let _ = writeln!(
            s,
            "  readers checks  {} ({:.1} distinct ROT ids each, {:.1} before merging)",
            m.readers_checks, m.distinct_rotids_per_check, m.rotids_per_check
        );
    }
    if m.blocked_rots > 0 {
        let _ = writeln!(s, "  blocking        {} ROTs, {} us total", m.blocked_rots, m.blocking_us_total);
    }
    for (k, st) in &m.per_kind {
        let _ = writeln!(s, "    {:<20} {:>10} msgs {:>12} bytes", k.name(), st.messages, st.bytes);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_csv_is_header_only() {
        let out = report(&[], ReportFormat::Csv).unwrap();
        assert_eq!(out.lines().count(), 1);
        assert_eq!(out.trim_end(), csv_columns().join(","));
    }

    #[test]
    fn csv_has_latency_columns_and_consistent_width() {
        let cols = csv_columns();
        assert!(cols.iter().any(|c| c == "rot_latency_mean_us"));
        assert!(cols.iter().any(|c| c == "rot_latency_p99_us"));
        let out = report(&[Metrics::default(), Metrics::default()], ReportFormat::Csv).unwrap();
        let mut r = csv::Reader::from_reader(out.as_bytes());
        assert_eq!(r.headers().unwrap().len(), cols.len());
        assert_eq!(r.records().map(|x| x.unwrap().len()).collect::<Vec<_>>(), vec![cols.len(); 2]);
    }

    #[test]
    fn formats_parse() {
        assert_eq!("csv".parse::<ReportFormat>().unwrap(), ReportFormat::Csv);
        assert!("xml".parse::<ReportFormat>().is_err());
    }
}
