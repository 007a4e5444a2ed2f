//! Deterministic with-replacement resampling and percentile extraction.
//!
//! Randomness is addressed by path: an [`RngStream`] is a master seed plus a
//! list of integers such as `[n, trial, phase, iteration, retry]`. The
//! generator for a path is a ChaCha8 instance keyed by a SHA-256 digest of
//! the seed and path, so iteration `b` of a bootstrap sees the same numbers
//! no matter which thread runs it or in which order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::par::{map_indices, Execution};
use crate::{Error, Result};

/// Phase tags used as the path component after the trial coordinates.
pub mod phase {
    pub const SPLIT: u64 = 0;
    pub const TUNING: u64 = 1;
    pub const MAIN: u64 = 2;
    pub const SYNTHETIC: u64 = 3;
    pub const FOLDS: u64 = 4;
    pub const MODEL_SPLIT: u64 = 5;
    pub const DISPLAY: u64 = 6;
}

/// Sub-stream tags inside one resample.
const LABELED_DRAW: u64 = 0;
const UNLABELED_DRAW: u64 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RngStream {
    master_seed: u64,
    path: Vec<u64>,
}

impl RngStream {
    pub fn new(master_seed: u64, path: &[u64]) -> Self {
        Self {
            master_seed,
            path: path.to_vec(),
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn path(&self) -> &[u64] {
        &self.path
    }

    /// The stream one level below this one.
    pub fn child(&self, component: u64) -> Self {
        let mut path = Vec::with_capacity(self.path.len() + 1);
        path.extend_from_slice(&self.path);
        path.push(component);
        Self {
            master_seed: self.master_seed,
            path,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut h = Sha256::new();
        h.update(b"ppboot-stream-v1");
        h.update(self.master_seed.to_le_bytes());
        h.update((self.path.len() as u64).to_le_bytes());
        for c in &self.path {
            h.update(c.to_le_bytes());
        }
        ChaCha8Rng::from_seed(h.finalize().into())
    }
}

/// Uniform draws from `0..len`, with replacement.
///
/// Draws through `u64` so the sequence does not depend on the platform's
/// pointer width.
pub fn draw_indices(len: usize, stream: &RngStream) -> Vec<usize> {
    let mut rng = stream.rng();
    let bound = len as u64;
    (0..len).map(|_| rng.random_range(0..bound) as usize).collect()
}

/// One bootstrap resample of a labeled/unlabeled pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResampleIndices {
    pub labeled: Vec<usize>,
    pub unlabeled: Vec<usize>,
}

/// Labeled row indices of the resample addressed by `stream`.
///
/// Identical to `draw_resample(..).labeled` for the same stream; the
/// labeled and unlabeled halves come from separate sub-streams so either
/// can be drawn alone.
pub fn draw_labeled(n: usize, stream: &RngStream) -> Vec<usize> {
    draw_indices(n, &stream.child(LABELED_DRAW))
}

pub fn draw_unlabeled(big_n: usize, stream: &RngStream) -> Vec<usize> {
    draw_indices(big_n, &stream.child(UNLABELED_DRAW))
}

pub fn draw_resample(n: usize, big_n: usize, stream: &RngStream) -> Result<ResampleIndices> {
    if n == 0 || big_n == 0 {
        return Err(Error::argument("resample sizes must be at least 1"));
    }
    Ok(ResampleIndices {
        labeled: draw_labeled(n, stream),
        unlabeled: draw_unlabeled(big_n, stream),
    })
}

/// 1-based nearest-rank position `ceil(q·len)` clamped to `[1, len]`.
///
/// `q·len` is nudged down by a few ulps first so that products which are
/// integers in exact arithmetic (e.g. `0.95 * 1000`) are not pushed to the
/// next rank by rounding error.
pub(crate) fn nearest_rank(q: f64, len: usize) -> usize {
    let x = q * len as f64;
    let rank = (x - x.abs() * 4.0 * f64::EPSILON).ceil();
    (rank.max(1.0) as usize).min(len)
}

/// Nearest-rank upper quantile: the element at 1-based position
/// `ceil(q·len)` of the ascending order statistics.
pub fn empirical_quantile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::argument("quantile of an empty sample"));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::argument(format!("quantile level {q} is not in (0, 1)")));
    }
    let mut buf = values.to_vec();
    Ok(select_rank(&mut buf, nearest_rank(q, values.len())))
}

/// The `rank`-th smallest value (1-based); reorders `buf`.
pub(crate) fn select_rank(buf: &mut [f64], rank: usize) -> f64 {
    let (_, v, _) = buf.select_nth_unstable_by(rank - 1, f64::total_cmp);
    *v
}

/// Percentile interval `(quantile(α/2), quantile(1−α/2))`.
pub fn percentile_interval(values: &[f64], alpha: f64) -> Result<(f64, f64)> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::argument(format!("alpha {alpha} is not in (0, 1)")));
    }
    if values.is_empty() {
        return Err(Error::argument("percentile interval of an empty sample"));
    }
    let mut buf = values.to_vec();
    let lo = select_rank(&mut buf, nearest_rank(alpha / 2.0, values.len()));
    let hi = select_rank(&mut buf, nearest_rank(1.0 - alpha / 2.0, values.len()));
    Ok((lo, hi))
}

/// Retained bootstrap replicates, in iteration order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BootstrapDraws {
    pub values: Vec<f64>,
    /// Iterations dropped after exhausting their retries.
    pub degenerate_iterations: usize,
}

/// Runs `iterations` bootstrap replicates.
///
/// Attempt `r` of iteration `b` receives the stream `base/b/r`. `replicate`
/// returns `None` for a degenerate resample; it is redrawn up to
/// `max_retries` times and then dropped.
pub fn run_replicates<F>(
    iterations: usize,
    max_retries: usize,
    base: &RngStream,
    exec: Execution,
    replicate: F,
) -> BootstrapDraws
where
    F: Fn(&RngStream) -> Option<f64> + Sync + Send,
{
    let per_iteration = map_indices(iterations, exec, |b| {
        let it = base.child(b as u64);
        (0..=max_retries as u64)
            .find_map(|r| replicate(&it.child(r)).filter(|v| v.is_finite()))
    });
    let mut out = BootstrapDraws {
        values: Vec::with_capacity(iterations),
        degenerate_iterations: 0,
    };
    for v in per_iteration {
        match v {
            Some(v) => out.values.push(v),
            None => out.degenerate_iterations += 1,
        }
    }
    out
}

/// Fails unless at least half of the requested iterations were retained.
pub(crate) fn require_half(draws: &BootstrapDraws, requested: usize) -> Result<()> {
    if draws.values.len() * 2 < requested || draws.values.is_empty() {
        return Err(Error::BootstrapFailure {
            retained: draws.values.len(),
            requested,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_row_resample() {
        let r = draw_resample(1, 1, &RngStream::new(5, &[1, 2])).unwrap();
        assert_eq!(r.labeled, vec![0]);
        assert_eq!(r.unlabeled, vec![0]);
    }

    #[test]
    fn resample_is_deterministic() {
        let s = RngStream::new(11, &[0, 2, 17]);
        assert_eq!(draw_resample(30, 70, &s).unwrap(), draw_resample(30, 70, &s).unwrap());
        assert_eq!(draw_labeled(30, &s), draw_resample(30, 70, &s).unwrap().labeled);
    }

    #[test]
    fn resample_rejects_empty() {
        assert!(draw_resample(0, 3, &RngStream::new(0, &[])).is_err());
    }

    #[test]
    fn labeled_indices_are_uniform() {
        let draws = 10_000u64;
        let mut counts = [0usize; 5];
        for b in 0..draws {
            let r = draw_resample(5, 7, &RngStream::new(3, &[b])).unwrap();
            assert!(r.unlabeled.iter().all(|&i| i < 7));
            for i in r.labeled {
                counts[i] += 1;
            }
        }
        let total = (draws * 5) as f64;
        let p = 0.2;
        let se = (p * (1.0 - p) / total).sqrt();
        for c in counts {
            assert!((c as f64 / total - p).abs() < 3.0 * se, "{counts:?}");
        }
    }

    #[test]
    fn distinct_paths_give_distinct_draws() {
        let mut seen = std::collections::HashSet::new();
        for b in 0..1000u64 {
            assert!(seen.insert(draw_indices(50, &RngStream::new(7, &[0, 2, b]))));
        }
        assert_ne!(
            draw_indices(50, &RngStream::new(7, &[1])),
            draw_indices(50, &RngStream::new(8, &[1]))
        );
        // Path length is part of the key.
        assert_ne!(
            draw_indices(50, &RngStream::new(7, &[0])),
            draw_indices(50, &RngStream::new(7, &[0, 0]))
        );
    }

    #[test]
    fn quantile_examples() {
        let hundred: Vec<f64> = (1..=100).map(|i| (i * 10) as f64).collect();
        // Oracle: 5th order statistic of the explicitly sorted sample.
        let mut sorted = hundred.clone();
        sorted.sort_by(f64::total_cmp);
        assert_eq!(empirical_quantile(&hundred, 0.05).unwrap(), sorted[4]);
        assert_eq!(empirical_quantile(&hundred, 0.05).unwrap(), 50.0);
        assert_eq!(empirical_quantile(&[3.0, 1.0, 2.0], 0.5).unwrap(), 2.0);
        assert_eq!(empirical_quantile(&[4.0; 9], 0.123).unwrap(), 4.0);
        assert!(empirical_quantile(&[], 0.5).is_err());
        assert!(empirical_quantile(&[1.0], 1.0).is_err());
    }

    #[test]
    fn nearest_rank_handles_float_products() {
        assert_eq!(nearest_rank(0.95, 1000), 950);
        assert_eq!(nearest_rank(0.05, 1000), 50);
        assert_eq!(nearest_rank(0.05, 100), 5);
        assert_eq!(nearest_rank(0.001, 10), 1);
        assert_eq!(nearest_rank(0.99, 3), 3);
        assert_eq!(nearest_rank(0.5, 4), 2);
        assert_eq!(nearest_rank(0.501, 4), 3);
    }

    #[test]
    fn replicates_retry_then_drop() {
        let base = RngStream::new(0, &[2]);
        // Degenerate on every first attempt: all iterations retained via retry 1.
        let d = run_replicates(10, 3, &base, Execution::Sequential, |s| {
            (s.path()[2] >= 1).then_some(1.0)
        });
        assert_eq!(d.values.len(), 10);
        assert_eq!(d.degenerate_iterations, 0);
        // Always degenerate: every iteration dropped.
        let d = run_replicates(10, 3, &base, Execution::Sequential, |_| None);
        assert_eq!(d.degenerate_iterations, 10);
        assert!(require_half(&d, 10).is_err());
    }

    proptest! {
        #[test]
        fn quantile_is_monotone_and_a_sample_element(
            v in prop::collection::vec(-1e3f64..1e3, 1..100),
            q1 in 0.001f64..0.999,
            q2 in 0.001f64..0.999,
        ) {
            let (lo, hi) = if q1 <= q2 { (q1, q2) } else { (q2, q1) };
            let a = empirical_quantile(&v, lo).unwrap();
            let b = empirical_quantile(&v, hi).unwrap();
            prop_assert!(a <= b);
            prop_assert!(v.contains(&a) && v.contains(&b));
        }

        #[test]
        fn quantile_matches_sorted_order_statistic(v in prop::collection::vec(-1e3f64..1e3, 1..60), q in 0.01f64..0.99) {
            let mut s = v.clone();
            s.sort_by(f64::total_cmp);
            let k = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
            // Only compare away from exact-integer products, where the nudge applies.
            if ((q * v.len() as f64) - (q * v.len() as f64).round()).abs() > 1e-9 {
                prop_assert_eq!(empirical_quantile(&v, q).unwrap(), s[k - 1]);
            }
        }
    }
}
