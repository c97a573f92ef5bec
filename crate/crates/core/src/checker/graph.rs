//! Causality between operations: program order, read-from, and their
//! transitive closure.

use std::collections::VecDeque;

use super::history::{History, OpKind};
use crate::{Error, Result};

/// Fixed-size set of operation indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitSet(Vec<u64>);

impl BitSet {
    pub fn new(n: usize) -> Self {
        BitSet(vec![0; n.div_ceil(64)])
    }

    pub fn insert(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0[i / 64] & (1 << (i % 64)) != 0
    }

    pub fn union_with(&mut self, other: &BitSet) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a |= b;
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().flat_map(|(w, &bits)| {
            (0..64).filter(move |b| bits & (1 << b) != 0).map(move |b| w * 64 + b)
        })
    }
}

#[derive(Debug, Clone)]
pub struct CausalityGraph {
    /// Direct predecessors of each operation.
    pub preds: Vec<Vec<usize>>,
    /// Strict causal past of each operation.
    pub past: Vec<BitSet>,
    /// Program-order predecessor, if any.
    pub prev: Vec<Option<usize>>,
}

impl CausalityGraph {
    pub fn build(h: &History) -> Result<Self> {
        let n = h.ops.len();
        let mut preds = vec![Vec::new(); n];
        let mut prev = vec![None; n];
        // The initial state precedes everything a client does.
        let preloads: Vec<usize> =
            (0..n).filter(|&i| matches!(h.ops[i].kind, OpKind::Preload { .. })).collect();
        for ids in h.by_client().values() {
            if let Some(&first) = ids.first() {
                preds[first].extend(&preloads);
            }
            for w in ids.windows(2) {
                preds[w[1]].push(w[0]);
                prev[w[1]] = Some(w[0]);
            }
        }
        for (i, op) in h.ops.iter().enumerate() {
            if let OpKind::Rot { result: Some(r), .. } = &op.kind {
                for v in r.iter().flatten() {
                    let &w = h
                        .writer
                        .get(v)
                        .ok_or_else(|| Error::MalformedTrace(format!("ROT {} read {v}, which nobody wrote", op.seq)))?;
                    if !preds[i].contains(&w) {
                        preds[i].push(w);
                    }
                }
            }
        }
        let order = topo_order(&preds)?;
        let mut past = vec![BitSet::new(n); n];
        for &i in &order {
            let mut acc = BitSet::new(n);
            for &p in &preds[i] {
                acc.insert(p);
                acc.union_with(&past[p]);
            }
            past[i] = acc;
        }
        Ok(CausalityGraph { preds, past, prev })
    }

    /// `a ⤳ b`.
    pub fn precedes(&self, a: usize, b: usize) -> bool {
        self.past[b].contains(a)
    }
}

fn topo_order(preds: &[Vec<usize>]) -> Result<Vec<usize>> {
    let n = preds.len();
    let mut succs = vec![Vec::new(); n];
    let mut indeg = vec![0usize; n];
    for (i, ps) in preds.iter().enumerate() {
        indeg[i] = ps.len();
        for &p in ps {
            succs[p].push(i);
        }
    }
    let mut queue: VecDeque<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(i) = queue.pop_front() {
        order.push(i);
        for &s in &succs[i] {
            indeg[s] -= 1;
            if indeg[s] == 0 {
                queue.push_back(s);
            }
        }
    }
    if order.len() != n {
        return Err(Error::MalformedTrace("causality graph has a cycle".into()));
    }
    Ok(order)
}
