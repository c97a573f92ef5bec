//! Per-partition multi-version storage.
//!
//! Each key owns a [`VersionChain`] kept in last-writer-wins order
//! `(creation_ts, origin_dc)`. Engines decide which versions are visible by
//! choosing the [`TsVector`] or timestamp they read at.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::clock::Timestamp;
use crate::types::{DcId, Key};

/// One timestamp per data center. Plays the role of snapshot vector (SV),
/// global stable snapshot (GSS), version vector (VV) and dependency vector (DV).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TsVector(pub Vec<Timestamp>);

pub type SnapshotVector = TsVector;
pub type GssVector = TsVector;
pub type VersionVector = TsVector;
pub type DependencyVector = TsVector;

impl TsVector {
    pub fn zeros(dcs: usize) -> Self {
        TsVector(vec![Timestamp::ZERO; dcs])
    }

    /// The vector that dominates every other, i.e. "read the latest".
    pub fn top(dcs: usize) -> Self {
        TsVector(vec![Timestamp::MAX; dcs])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, dc: DcId) -> Timestamp {
        self.0[usize::from(dc)]
    }

    pub fn set(&mut self, dc: DcId, ts: Timestamp) {
        self.0[usize::from(dc)] = ts;
    }

    /// Raises entry `dc` to `ts` if it is larger.
    pub fn raise(&mut self, dc: DcId, ts: Timestamp) {
        let e = &mut self.0[usize::from(dc)];
        if ts > *e {
            *e = ts;
        }
    }

    /// Entrywise `<=`.
    pub fn le(&self, other: &TsVector) -> bool {
        debug_assert_eq!(self.len(), other.len());
        self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    /// Entrywise maximum, in place.
    pub fn join(&mut self, other: &TsVector) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            if *b > *a {
                *a = *b;
            }
        }
    }

    /// Entrywise minimum, in place.
    pub fn meet(&mut self, other: &TsVector) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            if *b < *a {
                *a = *b;
            }
        }
    }

    /// Largest entry other than `dc`.
    pub fn max_excluding(&self, dc: DcId) -> Timestamp {
        self.0
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != usize::from(dc))
            .map(|(_, t)| *t)
            .max()
            .unwrap_or(Timestamp::ZERO)
    }
}

impl fmt::Display for TsVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, t) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{t}")?;
        }
        write!(f, "]")
    }
}

/// Identity of a version: enough for the checker to match reads to writes.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VersionId {
    pub key: Key,
    pub ts: Timestamp,
    pub dc: DcId,
}

impl VersionId {
    /// Last-writer-wins order key.
    pub fn lww(&self) -> (Timestamp, DcId) {
        (self.ts, self.dc)
    }
}

impl fmt::Display for VersionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}/{}", self.key, self.ts, self.dc)
    }
}

/// An immutable value of a key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Version {
    pub key: Key,
    pub value: Vec<u8>,
    pub dv: DependencyVector,
    pub origin_dc: DcId,
    pub creation_ts: Timestamp,
}

impl Version {
    /// Builds a version, enforcing `dv[origin] = creation_ts` and that the
    /// local entry dominates every remote one.
    pub fn new(key: Key, value: Vec<u8>, mut dv: DependencyVector, origin_dc: DcId, creation_ts: Timestamp) -> Self {
        debug_assert!(dv.max_excluding(origin_dc) <= creation_ts, "dv[origin] must dominate");
        dv.set(origin_dc, creation_ts);
        Version { key, value, dv, origin_dc, creation_ts }
    }

    pub fn id(&self) -> VersionId {
        VersionId { key: self.key.clone(), ts: self.creation_ts, dc: self.origin_dc }
    }

    pub fn lww(&self) -> (Timestamp, DcId) {
        (self.creation_ts, self.origin_dc)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VersionChain {
    versions: Vec<Version>,
}

impl VersionChain {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.versions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.versions.is_empty()
    }

    pub fn versions(&self) -> &[Version] {
        &self.versions
    }

    /// Inserts `v` in order. Returns `false` if a version with the same
    /// `(creation_ts, origin_dc)` is already present.
    pub fn install(&mut self, v: Version) -> bool {
        match self.versions.binary_search_by(|x| x.lww().cmp(&v.lww())) {
            Ok(_) => false,
            Err(pos) => {
                self.versions.insert(pos, v);
                true
            }
        }
    }

    pub fn contains(&self, ts: Timestamp, dc: DcId) -> bool {
        self.versions.binary_search_by(|x| x.lww().cmp(&(ts, dc))).is_ok()
    }

    /// The LWW winner, ignoring visibility.
    pub fn latest(&self) -> Option<&Version> {
        self.versions.last()
    }

    /// Newest version whose dependency vector is covered by `sv`.
    pub fn read_at(&self, sv: &SnapshotVector) -> Option<&Version> {
        self.versions.iter().rev().find(|v| v.dv.le(sv))
    }

    /// Newest version created at or before `t`.
    pub fn read_before(&self, t: Timestamp) -> Option<&Version> {
        self.versions.iter().rev().find(|v| v.creation_ts <= t)
    }

    /// Newest version ordered strictly before `(ts, dc)`.
    pub fn predecessor_of(&self, ts: Timestamp, dc: DcId) -> Option<&Version> {
        self.versions.iter().rev().find(|v| v.lww() < (ts, dc))
    }

    /// Drops every version covered by `low_watermark` except the newest such
    /// one. Reads at any `sv >= low_watermark` are unaffected.
    pub fn gc(&mut self, low_watermark: &SnapshotVector) {
        let Some(keep) = self.versions.iter().rposition(|v| v.dv.le(low_watermark)) else {
            return;
        };
        let mut idx = 0;
        self.versions.retain(|v| {
            let drop = idx < keep && v.dv.le(low_watermark);
            idx += 1;
            !drop
        });
    }
}

/// All chains owned by one partition replica.
#[derive(Debug, Clone, Default)]
pub struct PartitionStore {
    chains: BTreeMap<Key, VersionChain>,
}

impl PartitionStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn install(&mut self, v: Version) -> bool {
        self.chains.entry(v.key.clone()).or_default().install(v)
    }

    pub fn chain(&self, key: &str) -> Option<&VersionChain> {
        self.chains.get(key)
    }

    pub fn read_at(&self, key: &str, sv: &SnapshotVector) -> Option<&Version> {
        self.chains.get(key).and_then(|c| c.read_at(sv))
    }

    pub fn read_before(&self, key: &str, t: Timestamp) -> Option<&Version> {
        self.chains.get(key).and_then(|c| c.read_before(t))
    }

    pub fn latest(&self, key: &str) -> Option<&Version> {
        self.chains.get(key).and_then(|c| c.latest())
    }

    pub fn contains(&self, key: &str, ts: Timestamp, dc: DcId) -> bool {
        self.chains.get(key).is_some_and(|c| c.contains(ts, dc))
    }

    pub fn gc(&mut self, low_watermark: &SnapshotVector) {
        for c in self.chains.values_mut() {
            c.gc(low_watermark);
        }
    }

    pub fn keys(&self) -> impl Iterator<Item = &Key> {
        self.chains.keys()
    }

    /// LWW winner of every key, in key order.
    pub fn winners(&self) -> impl Iterator<Item = VersionId> + '_ {
        self.chains.values().filter_map(|c| c.latest().map(Version::id))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(key: &str, dc: DcId, dv: &[u64]) -> Version {
        let dv = TsVector(dv.iter().map(|t| Timestamp(*t)).collect());
        let ts = dv.get(dc);
        Version::new(key.into(), vec![0; 8], dv, dc, ts)
    }

    fn sv(e: &[u64]) -> TsVector {
        TsVector(e.iter().map(|t| Timestamp(*t)).collect())
    }

    #[test]
    fn install_keeps_order() {
        let mut c = VersionChain::new();
        assert!(c.install(v("x", 0, &[101])));
        assert!(c.install(v("x", 0, &[70])));
        let ts: Vec<_> = c.versions().iter().map(|v| v.creation_ts.0).collect();
        assert_eq!(ts, [70, 101]);
    }

    #[test]
    fn fresh_key_has_one_version() {
        let mut s = PartitionStore::new();
        s.install(v("k", 0, &[5]));
        assert_eq!(s.chain("k").unwrap().len(), 1);
    }

    #[test]
    fn duplicate_install_is_noop() {
        let mut c = VersionChain::new();
        let x = v("x", 1, &[3, 9]);
        assert!(c.install(x.clone()));
        assert!(!c.install(x));
        assert_eq!(c.len(), 1);
    }

    #[test]
    fn read_at_skips_versions_outside_snapshot() {
        let mut c = VersionChain::new();
        c.install(v("y", 0, &[70]));
        c.install(v("y", 0, &[102]));
        assert_eq!(c.read_at(&sv(&[100])).unwrap().creation_ts, Timestamp(70));
        assert!(VersionChain::new().read_at(&sv(&[100])).is_none());
    }

    #[test]
    fn read_before_returns_older_version() {
        let mut c = VersionChain::new();
        c.install(v("y", 0, &[70]));
        c.install(v("y", 0, &[102]));
        assert_eq!(c.read_before(Timestamp(90)).unwrap().creation_ts, Timestamp(70));
        assert!(c.read_before(Timestamp(10)).is_none());
    }

    #[test]
    fn gc_edges() {
        let mut c = VersionChain::new();
        for t in [10, 20, 30] {
            c.install(v("x", 0, &[t]));
        }
        let mut below = c.clone();
        below.gc(&sv(&[5]));
        assert_eq!(below.len(), 3);
        c.gc(&sv(&[100]));
        assert_eq!(c.len(), 1);
        assert_eq!(c.latest().unwrap().creation_ts, Timestamp(30));
    }

    fn oracle_read_at<'a>(vs: &'a [Version], sv: &TsVector) -> Option<&'a Version> {
        vs.iter().filter(|v| v.dv.le(sv)).max_by_key(|v| v.lww())
    }

    fn arb_version(dcs: usize) -> impl Strategy<Value = Version> {
        (0..dcs as u8, proptest::collection::vec(0u64..40, dcs)).prop_map(|(dc, mut dv)| {
            let m = dv.iter().copied().max().unwrap();
            dv[usize::from(dc)] = m + 1;
            v("k", dc, &dv)
        })
    }

    proptest! {
        #[test]
        fn read_at_matches_linear_scan(
            vs in proptest::collection::vec(arb_version(2), 0..64),
            probe in proptest::collection::vec(0u64..45, 2),
        ) {
            let mut c = VersionChain::new();
            let mut uniq: Vec<Version> = Vec::new();
            for x in vs {
                if c.install(x.clone()) { uniq.push(x); }
            }
            let s = TsVector(probe.iter().map(|t| Timestamp(*t)).collect());
            prop_assert_eq!(c.read_at(&s).map(Version::id), oracle_read_at(&uniq, &s).map(Version::id));
            let t = Timestamp(probe[0]);
            let expect = uniq.iter().filter(|v| v.creation_ts <= t).max_by_key(|v| v.lww()).map(Version::id);
            prop_assert_eq!(c.read_before(t).map(Version::id), expect);
        }

        #[test]
        fn redelivery_behaves_like_a_set(vs in proptest::collection::vec(arb_version(2), 0..30), dup in 0usize..30) {
            let mut once = VersionChain::new();
            for x in &vs { once.install(x.clone()); }
            let mut twice = once.clone();
            for x in vs.iter().cycle().take(dup) { twice.install(x.clone()); }
            let set: std::collections::BTreeSet<_> = vs.iter().map(Version::lww).collect();
            prop_assert_eq!(&once, &twice);
            prop_assert_eq!(once.len(), set.len());
        }

        #[test]
        fn gc_preserves_reads_above_watermark(
            vs in proptest::collection::vec(arb_version(2), 0..40),
            wm in proptest::collection::vec(0u64..45, 2),
            bump in proptest::collection::vec(0u64..10, 2),
        ) {
            let mut c = VersionChain::new();
            for x in vs { c.install(x); }
            let wm = TsVector(wm.iter().map(|t| Timestamp(*t)).collect());
            let mut probe = wm.clone();
            for (i, b) in bump.iter().enumerate() { probe.0[i] = Timestamp(probe.0[i].0 + b); }
            let before = c.read_at(&probe).map(Version::id);
            c.gc(&wm);
            prop_assert_eq!(c.read_at(&probe).map(Version::id), before);
            prop_assert!(c.versions().iter().filter(|v| v.dv.le(&wm)).count() <= 1);
        }

        #[test]
        fn lww_converges_regardless_of_delivery_order(
            vs in proptest::collection::vec(arb_version(2), 1..30),
            seed: u64,
        ) {
            use rand::{seq::SliceRandom, SeedableRng};
            let mut shuffled = vs.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let mut a = VersionChain::new();
            let mut b = VersionChain::new();
            for x in vs { a.install(x); }
            for x in shuffled { b.install(x); }
            let top = TsVector::top(2);
            prop_assert_eq!(a.read_at(&top).map(Version::id), b.read_at(&top).map(Version::id));
        }
    }

    /// Exhaustive small-instance check: every chain of single-DC versions with
    /// timestamps drawn from 1..=6 (as a subset) against every probe.
    #[test]
    fn read_at_exhaustive_small() {
        for mask in 0u32..(1 << 6) {
            let vs: Vec<Version> = (0..6).filter(|i| mask & (1 << i) != 0).map(|i| v("k", 0, &[i + 1])).collect();
            let mut c = VersionChain::new();
            for x in &vs {
                c.install(x.clone());
            }
            for p in 0..8 {
                let s = sv(&[p]);
                assert_eq!(c.read_at(&s).map(Version::id), oracle_read_at(&vs, &s).map(Version::id));
            }
        }
    }
}
