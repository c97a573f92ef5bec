//! Zipfian key ranks: rank r in 1..=n with probability proportional to 1/r^z.

use rand::Rng;

use crate::{Error, Result};

/// Inverse-CDF sampler over a precomputed cumulative table.
#[derive(Debug, Clone)]
pub struct Zipf {
    cdf: Vec<f64>,
    z: f64,
}

impl Zipf {
    pub fn new(n: u64, z: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::config("zipf keyspace must be at least 1"));
        }
        if !(z >= 0.0 && z.is_finite()) {
            return Err(Error::config(format!("zipf parameter must be finite and >= 0, got {z}")));
        }
        let mut cdf = Vec::with_capacity(n as usize);
        let mut acc = 0.0;
        for r in 1..=n {
            acc += (r as f64).powf(-z);
            cdf.push(acc);
        }
        for c in &mut cdf {
            *c /= acc;
        }
        Ok(Zipf { cdf, z })
    }

    pub fn n(&self) -> u64 {
        self.cdf.len() as u64
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    /// Probability of rank `r` (1-based).
    pub fn probability(&self, r: u64) -> f64 {
        let i = (r - 1) as usize;
        self.cdf[i] - if i == 0 { 0.0 } else { self.cdf[i - 1] }
    }

    /// Draws a 0-based key index; index 0 is the most popular key.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let u: f64 = rng.gen();
        let i = self.cdf.partition_point(|&c| c <= u);
        i.min(self.cdf.len() - 1) as u64
    }
}

/// Draws the next key index from `zipf` using `state`.
pub fn zipf_next<R: Rng + ?Sized>(state: &mut R, zipf: &Zipf) -> u64 {
    zipf.sample(state)
}
