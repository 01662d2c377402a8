//! Seeded, thread-count independent Monte Carlo.
//!
//! Work is cut into fixed-size chunks. Chunk `k` draws from a ChaCha8 stream
//! keyed by `(seed, k)`, and results are combined as integer counts or in
//! chunk order, so the output never depends on how rayon schedules chunks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

/// Samples per chunk.
pub const CHUNK: u64 = 1 << 16;

/// A Monte Carlo probability estimate with a 95% Wald interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MCEstimate {
    pub value: f64,
    pub half_width_95: f64,
    pub n_samples: u64,
    pub seed: u64,
}

impl MCEstimate {
    /// Estimate from `hits` successes in `n` trials. With zero hits the
    /// half width is the rule-of-three bound `3/n`.
    pub fn from_hits(hits: u64, n: u64, seed: u64) -> Self {
        let p = hits as f64 / n as f64;
        let half_width_95 = if hits == 0 {
            3.0 / n as f64
        } else {
            1.96 * (p * (1.0 - p) / n as f64).sqrt()
        };
        Self {
            value: p,
            half_width_95,
            n_samples: n,
            seed,
        }
    }

    /// `value ± half_width_95`, clipped to `[0, 1]`.
    pub fn interval(&self) -> (f64, f64) {
        (
            (self.value - self.half_width_95).max(0.0),
            (self.value + self.half_width_95).min(1.0),
        )
    }

    pub fn contains(&self, x: f64) -> bool {
        let (lo, hi) = self.interval();
        lo <= x && x <= hi
    }
}

/// Generator for chunk `chunk` of the run keyed by `seed`.
pub fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

fn chunks(n: u64) -> impl IndexedParallelIterator<Item = (u64, u64)> {
    let count = n.div_ceil(CHUNK) as usize;
    (0..count).into_par_iter().map(move |k| {
        let k = k as u64;
        (k, CHUNK.min(n - k * CHUNK))
    })
}

/// Counts the trials for which `trial` returns true.
pub fn count_hits<F>(n: u64, seed: u64, trial: F) -> u64
where
    F: Fn(&mut ChaCha8Rng) -> bool + Sync,
{
    chunks(n)
        .map(|(k, len)| {
            let mut rng = chunk_rng(seed, k);
            (0..len).filter(|_| trial(&mut rng)).count() as u64
        })
        .sum()
}

/// Estimates `P(trial)` from `n` seeded trials.
pub fn estimate<F>(n: u64, seed: u64, trial: F) -> MCEstimate
where
    F: Fn(&mut ChaCha8Rng) -> bool + Sync,
{
    MCEstimate::from_hits(count_hits(n, seed, trial), n, seed)
}

/// `n` draws of `draw`, in a fixed order.
pub fn sample<T, F>(n: u64, seed: u64, draw: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng) -> T + Sync,
{
    let parts: Vec<Vec<T>> = chunks(n)
        .map(|(k, len)| {
            let mut rng = chunk_rng(seed, k);
            (0..len).map(|_| draw(&mut rng)).collect()
        })
        .collect();
    parts.into_iter().flatten().collect()
}
