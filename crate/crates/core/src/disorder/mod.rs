//! Monte Carlo studies of fabrication disorder: random on-site frequencies
//! of the microwave ring and random mechanical frequencies.
//!
//! Draw `k` of a run with seed `s` uses ChaCha8 seeded with `s` on stream
//! `k`, so results do not depend on the number of worker threads.

mod mechanical;
mod microwave;

pub use mechanical::*;
pub use microwave::*;

use crate::error::ensure;
use crate::Result;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Generator name recorded in output metadata.
pub const RNG_ALGORITHM: &str = "ChaCha8 (rand_chacha 0.9), seed_from_u64(seed), stream = draw index";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DisorderTarget {
    Microwave,
    Mechanical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisorderSpec {
    pub target: DisorderTarget,
    /// Relative standard deviation of the disordered frequencies.
    pub sigma: f64,
    pub samples: usize,
    pub seed: u64,
}

impl DisorderSpec {
    pub const DEFAULT_MICROWAVE_SAMPLES: usize = 100_000;
    pub const DEFAULT_MECHANICAL_SAMPLES: usize = 1_000;

    pub fn microwave(sigma: f64, seed: u64) -> Self {
        Self { target: DisorderTarget::Microwave, sigma, samples: Self::DEFAULT_MICROWAVE_SAMPLES, seed }
    }

    pub fn mechanical(sigma: f64, seed: u64) -> Self {
        Self { target: DisorderTarget::Mechanical, sigma, samples: Self::DEFAULT_MECHANICAL_SAMPLES, seed }
    }

    pub fn with_samples(self, samples: usize) -> Self {
        Self { samples, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.sigma >= 0.0 && self.sigma.is_finite(), || format!("disorder sigma {} must be >= 0", self.sigma))?;
        ensure(self.samples >= 1, || "sample count must be at least 1".into())
    }
}

/// Independent, reproducible stream for draw `draw` of a run seeded with `seed`.
pub fn draw_rng(seed: u64, draw: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(draw as u64);
    rng
}

/// Ensemble mean, standard deviation and 5th/95th percentiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub p5: f64,
    pub p95: f64,
}

impl Summary {
    pub fn from_samples(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self { mean: f64::NAN, std: f64::NAN, p5: f64::NAN, p95: f64::NAN };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = if n > 1 { values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Self { mean, std: var.sqrt(), p5: percentile(&sorted, 5.0), p95: percentile(&sorted, 95.0) }
    }

    /// Standard error of the mean for `n` samples.
    pub fn sem(&self, n: usize) -> f64 {
        self.std / (n as f64).sqrt()
    }
}

/// Linear-interpolation percentile of sorted data.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = p / 100.0 * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Fixed-range histogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn new(values: &[f64], lo: f64, hi: f64, bins: usize) -> Self {
        let edges: Vec<f64> = (0..=bins).map(|k| lo + (hi - lo) * k as f64 / bins as f64).collect();
        let mut counts = vec![0; bins];
        for v in values {
            if *v >= lo && *v <= hi {
                let k = (((v - lo) / (hi - lo)) * bins as f64) as usize;
                counts[k.min(bins - 1)] += 1;
            }
        }
        Self { edges, counts }
    }
}
