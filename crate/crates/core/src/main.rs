use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use causalkv::bench::{self, ReportFormat};
use causalkv::checker;
use causalkv::cluster::{scenario, Backend, RunConfig};
use causalkv::engine::{EngineConfig, EngineKind, RotMode};
use causalkv::transport::trace;
use causalkv::Result;

/// Causally consistent key-value store: simulated and socket runs,
/// directed scenarios and the offline trace checker.
///
/// Every flag can also be set through an environment variable named
/// CKV_<FLAG>, e.g. CKV_ENGINE=cclo or CKV_DURATION=500. Flags override
/// environment variables, which override the config file.
#[derive(Parser)]
#[command(name = "causalkv", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a closed-loop workload and report metrics.
    Run(RunArgs),
    /// Replay a named scenario (fig1, fig2, e_star_demo) and check it.
    Scenario(ScenarioArgs),
    /// Check a JSONL trace written by `run --trace-out`.
    Check {
        trace: PathBuf,
        /// Print the full JSON report instead of a summary.
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration; see the README for the keys.
    #[arg(long, env = "CKV_CONFIG")]
    config: Option<PathBuf>,
    #[arg(long, env = "CKV_ENGINE")]
    engine: Option<EngineKind>,
    #[arg(long, env = "CKV_ROT_MODE")]
    rot_mode: Option<RotMode>,
    /// Write ratio.
    #[arg(long, env = "CKV_W")]
    w: Option<f64>,
    /// Partitions per ROT.
    #[arg(long, env = "CKV_P")]
    p: Option<u16>,
    /// Zipfian skew.
    #[arg(long, env = "CKV_Z")]
    z: Option<f64>,
    /// Value size in bytes.
    #[arg(long, env = "CKV_B")]
    b: Option<usize>,
    #[arg(long, env = "CKV_CLIENTS")]
    clients: Option<u32>,
    #[arg(long, env = "CKV_PARTITIONS")]
    partitions: Option<u16>,
    #[arg(long, env = "CKV_DCS")]
    dcs: Option<u8>,
    /// Keys per partition.
    #[arg(long, env = "CKV_KEYSPACE")]
    keyspace: Option<u64>,
    #[arg(long, env = "CKV_SEED")]
    seed: Option<u64>,
    /// Issuing period in milliseconds.
    #[arg(long, env = "CKV_DURATION")]
    duration: Option<u64>,
    #[arg(long, env = "CKV_BACKEND")]
    backend: Option<Backend>,
    /// Write the run trace as JSONL (sim backend only).
    #[arg(long, env = "CKV_TRACE_OUT")]
    trace_out: Option<PathBuf>,
    #[arg(long, env = "CKV_REPORT")]
    report: Option<ReportFormat>,
    /// Also run the checker on the trace.
    #[arg(long, env = "CKV_CHECK")]
    check: bool,
}

#[derive(Args)]
struct ScenarioArgs {
    name: String,
    #[arg(long, env = "CKV_ENGINE", default_value = "contrarian")]
    engine: EngineKind,
    #[arg(long, env = "CKV_ROT_MODE", default_value = "1.5")]
    rot_mode: RotMode,
    #[arg(long, env = "CKV_TRACE_OUT")]
    trace_out: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

fn resolve(a: RunArgs) -> Result<(RunConfig, bool)> {
    let mut c = match &a.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let w = &mut c.workload;
    macro_rules! set {
        ($($f:ident => $t:expr),*) => { $(if let Some(v) = a.$f { $t = v; })* };
    }
    set!(engine => w.engine, rot_mode => w.rot_mode, w => w.w, p => w.p, z => w.z, b => w.b,
        clients => w.clients, partitions => w.partitions, dcs => w.dcs, keyspace => w.keyspace,
        seed => w.seed, duration => w.duration_ms, backend => c.backend, report => c.report);
    if a.trace_out.is_some() {
        c.trace_out = a.trace_out;
    }
    c.workload.record_trace = c.trace_out.is_some() || a.check;
    c.validate()?;
    Ok((c, a.check))
}

fn write_trace(path: &PathBuf, events: &[trace::TraceEvent]) -> Result<()> {
    trace::write_jsonl(events, BufWriter::new(File::create(path)?))
}

fn run(a: RunArgs) -> Result<bool> {
    let (c, check) = resolve(a)?;
    let mut ok = true;
    let metrics = match c.backend {
        Backend::Sim => {
            let ex = bench::run_experiment(&c.workload)?;
            if let Some(t) = &ex.trace {
                if let Some(p) = &c.trace_out {
                    write_trace(p, t)?;
                }
                if check {
                    let r = checker::check(t)?;
                    eprintln!("{}", r.summary());
                    ok = r.passed();
                }
            }
            ex.metrics
        }
        Backend::Socket => bench::run_socket(&c.workload)?,
    };
    print!("{}", bench::report(&[metrics], c.report)?);
    Ok(ok)
}

fn run_scenario(a: ScenarioArgs) -> Result<bool> {
    let engine = EngineConfig::new(a.engine).with_rot_mode(a.rot_mode);
    let out = scenario::run_scenario(&a.name, &engine)?;
    if let Some(p) = &a.trace_out {
        write_trace(p, &out.trace)?;
    }
    if a.json {
        println!("{}", out.report.to_json());
    } else {
        println!("scenario {} on {} (rot mode {})", out.name, a.engine, a.rot_mode);
        println!("{}", out.report.summary());
        for v in &out.report.snapshot_violations {
            println!("violation: {v:?}");
        }
    }
    Ok(out.report.passed())
}

fn check(path: PathBuf, json: bool) -> Result<bool> {
    let events = trace::read_jsonl(BufReader::new(File::open(path)?))?;
    let r = checker::check(&events)?;
    if json {
        println!("{}", r.to_json());
    } else {
        println!("{}", r.summary());
    }
    Ok(r.passed())
}

fn main() -> ExitCode {
    let res = match Cli::parse().cmd {
        Cmd::Run(a) => run(a),
        Cmd::Scenario(a) => run_scenario(a),
        Cmd::Check { trace, json } => check(trace, json),
    };
    match res {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
