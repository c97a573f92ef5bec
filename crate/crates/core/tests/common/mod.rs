//! Reference computations shared by the oracle tests and the acceptance run.
#![allow(dead_code)]

use std::sync::Arc;

use causalkv::bench::{zipf_next, KeySpace, WorkloadConfig, WorkloadSource, Zipf};
use causalkv::clock::Timestamp;
use causalkv::engine::ClientOp;
use causalkv::storage::{TsVector, Version, VersionChain, VersionId};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Generalized harmonic number, summed smallest terms first.
pub fn harmonic(n: u64, z: f64) -> f64 {
    (1..=n).rev().map(|r| 1.0 / (r as f64).powf(z)).sum()
}

/// Frequencies of the first `ranks` ranks over `draws` samples.
pub fn rank_frequencies(n: u64, z: f64, draws: u32, ranks: usize, seed: u64) -> Vec<f64> {
    let zipf = Zipf::new(n, z).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0u64; ranks];
    for _ in 0..draws {
        let i = zipf_next(&mut rng, &zipf) as usize;
        if i < ranks {
            counts[i] += 1;
        }
    }
    counts.into_iter().map(|c| c as f64 / f64::from(draws)).collect()
}

/// Largest relative error of the empirical frequency of ranks 1..=`ranks`
/// against 1/(r^z H(n, z)) over a million draws.
pub fn zipf_max_relative_error(n: u64, z: f64, ranks: usize, seed: u64) -> f64 {
    let h = harmonic(n, z);
    rank_frequencies(n, z, 1_000_000, ranks, seed)
        .iter()
        .enumerate()
        .map(|(i, got)| {
            let expect = 1.0 / ((i + 1) as f64).powf(z) / h;
            (got - expect).abs() / expect
        })
        .fold(0.0, f64::max)
}

/// PUTs over PUTs plus key reads for `ops` generated operations.
pub fn realized_ratio(w: f64, ops: u32) -> f64 {
    let cfg = WorkloadConfig { w, ..Default::default() };
    let topo = cfg.topology().unwrap();
    let ks = Arc::new(KeySpace::new(topo, 100));
    let zipf = Arc::new(Zipf::new(100, cfg.z).unwrap());
    let mut src = WorkloadSource::new(&cfg, 0, ks, zipf);
    let (mut puts, mut reads) = (0u64, 0u64);
    for _ in 0..ops {
        match src.draw() {
            ClientOp::Put { .. } => puts += 1,
            ClientOp::Rot { keys } => reads += keys.len() as u64,
        }
    }
    puts as f64 / (puts + reads) as f64
}

/// Chain of `len` versions alternating between two DCs, with random remote
/// dependencies; timestamps are unique so LWW is a total order.
fn chain_versions(len: usize, rng: &mut ChaCha8Rng) -> Vec<Version> {
    (0..len)
        .map(|i| {
            let dc = (i % 2) as u8;
            let own = 2 * i as u64 + 2;
            let mut dv = TsVector::zeros(2);
            dv.set(1 - dc, Timestamp(rng.gen_range(0..=own)));
            Version::new("k".into(), vec![], dv, dc, Timestamp(own))
        })
        .collect()
}

/// Reference read: among versions whose dependency vector is covered, the
/// one that wins last-writer-wins.
fn reference_read(vs: &[Version], sv: &TsVector) -> Option<VersionId> {
    let mut best: Option<&Version> = None;
    for v in vs {
        let covered = (0..2u8).all(|d| v.dv.get(d) <= sv.get(d));
        if covered && best.is_none_or(|b| (v.creation_ts, v.origin_dc) > (b.creation_ts, b.origin_dc)) {
            best = Some(v);
        }
    }
    best.map(Version::id)
}

/// Every chain length from 0 to 64, installed in random order, probed at
/// every snapshot vector and read-before bound up to past the newest
/// timestamp. Returns the number of probes, or the first mismatch.
pub fn read_at_exhaustive(max_len: usize) -> Result<u64, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(64);
    let mut probes = 0;
    for len in 0..=max_len {
        let vs = chain_versions(len, &mut rng);
        let mut order = vs.clone();
        order.shuffle(&mut rng);
        let mut c = VersionChain::new();
        for v in order {
            c.install(v);
        }
        if c.len() != len {
            return Err(format!("chain of {len} holds {}", c.len()));
        }
        let top = 2 * len as u64 + 3;
        for a in 0..=top {
            for b in 0..=top {
                let sv = TsVector(vec![Timestamp(a), Timestamp(b)]);
                let (got, want) = (c.read_at(&sv).map(Version::id), reference_read(&vs, &sv));
                if got != want {
                    return Err(format!("len {len} sv {sv}: {got:?} != {want:?}"));
                }
                probes += 1;
            }
            let t = Timestamp(a);
            let want = vs.iter().filter(|v| v.creation_ts <= t).map(Version::id).max_by_key(|v| (v.ts, v.dc));
            let got = c.read_before(t).map(Version::id);
            if got != want {
                return Err(format!("len {len} before {a}: {got:?} != {want:?}"));
            }
            probes += 1;
        }
    }
    Ok(probes)
}
