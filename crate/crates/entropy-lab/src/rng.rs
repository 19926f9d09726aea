//! Deterministic counter-based RNG streams.
//!
//! Every Monte Carlo loop in the crate draws from ChaCha streams derived from
//! a root seed and a stream id. Outer loops are partitioned into fixed-size
//! chunks, one stream per chunk, and reduced pairwise in a fixed tree order,
//! so results are bit-identical for a given seed no matter how many worker
//! threads run the chunks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

pub type LabRng = ChaCha12Rng;

/// Fixed chunk length for partitioned outer MC loops.
pub const CHUNK: usize = 4096;

/// Root of a deterministic stream tree.
#[derive(Clone, Copy, Debug)]
pub struct Streams {
    seed: u64,
}

impl Streams {
    pub fn new(seed: u64) -> Self {
        Streams { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Stream for a named task. Same (seed, path) pairs always yield the
    /// same generator.
    pub fn rng(&self, path: &str) -> LabRng {
        self.rng_id(fnv1a(path))
    }

    pub fn rng_id(&self, id: u64) -> LabRng {
        let mut rng = ChaCha12Rng::seed_from_u64(self.seed);
        rng.set_stream(id);
        rng
    }
}

fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x1000_0000_01b3);
    }
    h
}

/// Derive a child stream root from the current rng state. The child is a
/// pure function of the rng state at the call site, so callers that hold a
/// `&mut LabRng` can fan out into reproducible parallel chunks.
pub fn child_streams(rng: &mut LabRng) -> Streams {
    Streams::new(rng.random::<u64>())
}

/// Sum in a fixed pairwise tree order (reduces rounding drift and keeps the
/// reduction order independent of thread count).
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}

/// Map each fixed-size chunk of an `m`-draw loop under its own stream and
/// collect the per-chunk results in chunk order.
pub fn par_chunk_map<T, F>(streams: &Streams, base_id: u64, m: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut LabRng, usize) -> T + Sync,
{
    let n_chunks = m.div_ceil(CHUNK);
    (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let len = CHUNK.min(m - c * CHUNK);
            let mut rng = streams.rng_id(base_id.wrapping_add(1 + c as u64));
            f(&mut rng, len)
        })
        .collect()
}

/// Mean and standard error of a scalar function of iid draws, computed with
/// per-chunk streams and pairwise reduction.
pub fn chunked_mean_se<F>(rng: &mut LabRng, m: usize, f: F) -> (f64, f64)
where
    F: Fn(&mut LabRng) -> f64 + Sync,
{
    assert!(m >= 2, "need at least two draws");
    let streams = child_streams(rng);
    let stats = par_chunk_map(&streams, 0, m, |chunk_rng, len| {
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..len {
            let v = f(chunk_rng);
            sum += v;
            sumsq += v * v;
        }
        (sum, sumsq)
    });
    let sums: Vec<f64> = stats.iter().map(|s| s.0).collect();
    let sumsqs: Vec<f64> = stats.iter().map(|s| s.1).collect();
    let total = pairwise_sum(&sums);
    let total_sq = pairwise_sum(&sumsqs);
    let mean = total / m as f64;
    let var = ((total_sq - m as f64 * mean * mean) / (m as f64 - 1.0)).max(0.0);
    (mean, (var / m as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible() {
        let s = Streams::new(42);
        let a: Vec<u64> = {
            let mut r = s.rng("task/a");
            (0..4).map(|_| r.random()).collect()
        };
        let b: Vec<u64> = {
            let mut r = s.rng("task/a");
            (0..4).map(|_| r.random()).collect()
        };
        assert_eq!(a, b);
        let c: Vec<u64> = {
            let mut r = s.rng("task/b");
            (0..4).map(|_| r.random()).collect()
        };
        assert_ne!(a, c);
    }

    #[test]
    fn chunked_mean_matches_direct_expectation() {
        let mut rng = Streams::new(7).rng("mean");
        let (mean, se) = chunked_mean_se(&mut rng, 100_000, |r| r.random::<f64>());
        assert!((mean - 0.5).abs() < 4.0 * se, "mean {mean} se {se}");
        assert!((se - (1.0 / 12.0f64 / 1e5).sqrt()).abs() < 1e-4);
    }

    #[test]
    fn chunked_mean_independent_of_thread_count() {
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| {
                let mut rng = Streams::new(11).rng("det");
                chunked_mean_se(&mut rng, 50_000, |r| r.random::<f64>())
            })
        };
        let a = run(1);
        let b = run(4);
        assert_eq!(a.0.to_bits(), b.0.to_bits());
        assert_eq!(a.1.to_bits(), b.1.to_bits());
    }

    #[test]
    fn pairwise_sum_handles_edges() {
        assert_eq!(pairwise_sum(&[]), 0.0);
        assert_eq!(pairwise_sum(&[1.5]), 1.5);
        assert_eq!(pairwise_sum(&[1.0, 2.0, 3.0, 4.0]), 10.0);
    }
}
