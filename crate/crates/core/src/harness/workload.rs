use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::topology::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ValueModel {
    /// Uniform reals in `[lo, hi)`.
    Uniform { lo: f64, hi: f64 },
    /// Uniform integers in `[lo, hi]`, handy for exact arithmetic.
    Integers { lo: i64, hi: i64 },
}

/// Periodic sensing: every source samples once per period, with a uniform
/// send offset in `[0, offset_max_ms]` after the period boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Workload {
    pub period_ms: f64,
    pub epochs: u64,
    pub values: ValueModel,
    pub offset_max_ms: f64,
}

impl Default for Workload {
    fn default() -> Self {
        Workload {
            period_ms: 100.0,
            epochs: 100,
            values: ValueModel::Uniform { lo: 0.0, hi: 100.0 },
            offset_max_ms: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sample {
    pub source: NodeId,
    pub epoch: u64,
    pub timestamp_ms: f64,
    pub value: f64,
}

impl Workload {
    pub fn horizon_ms(&self) -> f64 {
        self.period_ms * self.epochs as f64
    }

    /// Samples in (epoch, source order) order. The same seed and sources give
    /// the same samples.
    pub fn generate(&self, sources: &[NodeId], seed: u64) -> Vec<Sample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(sources.len() * self.epochs as usize);
        for epoch in 0..self.epochs {
            for s in sources {
                let offset = if self.offset_max_ms > 0.0 {
                    rng.random_range(0.0..=self.offset_max_ms)
                } else {
                    0.0
                };
                let value = match self.values {
                    ValueModel::Uniform { lo, hi } => rng.random_range(lo..hi),
                    ValueModel::Integers { lo, hi } => rng.random_range(lo..=hi) as f64,
                };
                out.push(Sample {
                    source: s.clone(),
                    epoch,
                    timestamp_ms: epoch as f64 * self.period_ms + offset,
                    value,
                });
            }
        }
        out
    }
}
