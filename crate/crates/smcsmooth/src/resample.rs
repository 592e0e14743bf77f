//! Unbiased resampling schemes: multinomial, systematic, and the adjacent
//! resampler that reorders a systematic draw along the Hilbert curve so
//! consecutive output slots tend to carry distinct but spatially close
//! particles.

use rand::RngExt as _;
use rand::Rng;

use crate::error::Result;
use crate::hilbert::hilbert_sort;
use crate::sampler::{validate_simplex, DiscreteSampler};

/// How ancestors are drawn in the forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResamplingScheme {
    /// Conditionally i.i.d. draws from the multinomial distribution.
    Multinomial,
    /// Single shared uniform; low variance, `O(N)`.
    Systematic,
    /// Systematic draw reordered along the Hilbert curve (pairs of slots
    /// get distinct, nearby ancestors whenever possible).
    Adjacent,
}

/// `n_draws` i.i.d. indices from the multinomial distribution on the
/// weights.
pub fn multinomial_resample(
    weights: &[f64],
    n_draws: usize,
    rng: &mut dyn Rng,
) -> Result<Vec<usize>> {
    let sampler = DiscreteSampler::new(weights)?;
    Ok((0..n_draws).map(|_| sampler.sample(rng)).collect())
}

/// Systematic resampling: index `n` (0-based) maps to the unique `k` whose
/// cumulative-weight bracket contains `(n + U) / N`.
pub fn systematic_resample(weights: &[f64], rng: &mut dyn Rng) -> Result<Vec<usize>> {
    let u = rng.random::<f64>();
    systematic_resample_with(weights, u)
}

/// Deterministic core of systematic resampling given the uniform draw.
pub fn systematic_resample_with(weights: &[f64], u: f64) -> Result<Vec<usize>> {
    validate_simplex(weights, 1e-9)?;
    let n = weights.len();
    let mut out = Vec::with_capacity(n);
    let mut cumulative = weights[0];
    let mut k = 0usize;
    for i in 0..n {
        let target = (i as f64 + u) / n as f64;
        // Index k owns the bracket [cumsum(k-1), cumsum(k)), so advance
        // past exact ties.
        while cumulative <= target && k + 1 < n {
            k += 1;
            cumulative += weights[k];
        }
        out.push(k);
    }
    Ok(out)
}

/// The adjacent resampler.
///
/// Runs systematic resampling, re-expresses the resulting counts over the
/// Hilbert-sorted particle order, then walks between occupied positions so
/// that successive outputs alternate between nearby distinct particles
/// whenever the counts allow it. The output index multiset equals the
/// systematic-resampling multiset.
pub fn adjacent_resample(
    states: &[&[f64]],
    weights: &[f64],
    rng: &mut dyn Rng,
) -> Result<Vec<usize>> {
    let n = weights.len();
    let sorted = hilbert_sort(states)?;
    let u = rng.random::<f64>();
    let resampled = systematic_resample_with(weights, u)?;

    // f[i] = how many times the particle at sorted position i was drawn.
    let mut position_of = vec![0usize; n];
    for (pos, &orig) in sorted.iter().enumerate() {
        position_of[orig] = pos;
    }
    let mut f = vec![0i64; n];
    for &idx in &resampled {
        f[position_of[idx]] += 1;
    }

    let mut out = Vec::with_capacity(n);
    // Start on the first occupied position (the walk assumes f[i] > 0).
    let mut i = match f.iter().position(|&c| c > 0) {
        Some(p) => p,
        None => return Ok(out),
    };
    for _ in 0..n {
        out.push(sorted[i]);
        f[i] -= 1;
        let right = (i + 1..n).find(|&l| f[l] > 0);
        let left = (0..i).rev().find(|&l| f[l] > 0);
        i = match (left, right) {
            (None, None) => i,
            (Some(l), None) => l,
            (None, Some(r)) => r,
            (Some(l), Some(r)) => {
                if f[l] > f[r] {
                    l
                } else if f[r] > f[l] {
                    r
                } else if rng.random::<bool>() {
                    l
                } else {
                    r
                }
            }
        };
    }
    Ok(out)
}

/// Effective sample size `1 / sum W_i^2` of a weight vector, in `[1, N]`.
pub fn ess(weights: &[f64]) -> f64 {
    let sum_sq: f64 = weights.iter().map(|w| w * w).sum();
    1.0 / sum_sq
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use proptest::prelude::*;

    #[test]
    fn multinomial_point_mass() {
        let mut rng = stream_rng(3, 0);
        let idx = multinomial_resample(&[1.0, 0.0, 0.0], 50, &mut rng).unwrap();
        assert!(idx.iter().all(|&i| i == 0));
    }

    #[test]
    fn multinomial_frequency_binomial_ci() {
        let mut rng = stream_rng(3, 1);
        let n = 1_000_000;
        let idx = multinomial_resample(&[0.3, 0.7], n, &mut rng).unwrap();
        let freq = idx.iter().filter(|&&i| i == 1).count() as f64 / n as f64;
        assert!((freq - 0.7).abs() < 0.002, "freq {freq}");
    }

    #[test]
    fn multinomial_counts_match_moments() {
        // Random 10-point simplex, mean counts within 4 SE of N * W_i.
        let mut rng = stream_rng(3, 2);
        let raw: Vec<f64> = (0..10).map(|_| rng.random::<f64>()).collect();
        let total: f64 = raw.iter().sum();
        let w: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let n = 200_000;
        let idx = multinomial_resample(&w, n, &mut rng).unwrap();
        let mut counts = vec![0usize; 10];
        for &i in &idx {
            counts[i] += 1;
        }
        for i in 0..10 {
            let mean = n as f64 * w[i];
            let sd = (n as f64 * w[i] * (1.0 - w[i])).sqrt();
            assert!(
                (counts[i] as f64 - mean).abs() < 4.0 * sd,
                "count {} vs mean {mean}",
                counts[i]
            );
        }
    }

    #[test]
    fn systematic_symmetric_two_particles() {
        for seed in 0..20 {
            let mut rng = stream_rng(4, seed);
            let idx = systematic_resample(&[0.5, 0.5], &mut rng).unwrap();
            assert_eq!(idx, vec![0, 1]);
        }
    }

    #[test]
    fn systematic_exact_tie_picks_the_open_bracket() {
        // u = 0 with equal weights puts the second target exactly on the
        // first cumulative weight; the bracket is half-open, so the draw
        // belongs to the next index.
        let idx = systematic_resample_with(&[0.5, 0.5], 0.0).unwrap();
        assert_eq!(idx, vec![0, 1]);
        let idx = systematic_resample_with(&[0.25; 4], 0.0).unwrap();
        assert_eq!(idx, vec![0, 1, 2, 3]);
    }

    #[test]
    fn systematic_point_mass() {
        let mut rng = stream_rng(4, 100);
        let w = [1.0, 0.0, 0.0, 0.0];
        let idx = systematic_resample(&w, &mut rng).unwrap();
        assert!(idx.iter().all(|&i| i == 0));
    }

    #[test]
    fn systematic_unbiased_monte_carlo() {
        let mut rng = stream_rng(4, 5);
        let raw: Vec<f64> = (0..6).map(|_| rng.random::<f64>()).collect();
        let total: f64 = raw.iter().sum();
        let w: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let reps = 100_000;
        let n = w.len() as f64;
        let mut mean_counts = vec![0.0f64; w.len()];
        for _ in 0..reps {
            let idx = systematic_resample(&w, &mut rng).unwrap();
            for &i in &idx {
                mean_counts[i] += 1.0;
            }
        }
        for i in 0..w.len() {
            let mean = mean_counts[i] / reps as f64;
            // Counts are deterministic within +-1 of N*W given U, so the SE
            // of the mean count is below 1/sqrt(reps).
            let se = 1.0 / (reps as f64).sqrt();
            assert!(
                (mean - n * w[i]).abs() < 4.0 * se,
                "mean count {mean} vs {}",
                n * w[i]
            );
        }
    }

    #[test]
    fn adjacent_two_equal_weights_is_permutation() {
        let pts: Vec<Vec<f64>> = vec![vec![0.0], vec![1.0]];
        let refs: Vec<&[f64]> = pts.iter().map(|p| p.as_slice()).collect();
        for seed in 0..20 {
            let mut rng = stream_rng(5, seed);
            let mut idx = adjacent_resample(&refs, &[0.5, 0.5], &mut rng).unwrap();
            idx.sort_unstable();
            assert_eq!(idx, vec![0, 1]);
        }
    }

    #[test]
    fn adjacent_preserves_systematic_multiset() {
        let mut rng = stream_rng(5, 77);
        let n = 40;
        let pts: Vec<Vec<f64>> = (0..n)
            .map(|_| vec![rng.random::<f64>(), rng.random::<f64>()])
            .collect();
        let refs: Vec<&[f64]> = pts.iter().map(|p| p.as_slice()).collect();
        let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let total: f64 = raw.iter().sum();
        let w: Vec<f64> = raw.iter().map(|x| x / total).collect();

        for seed in 0..10 {
            // Same seed feeds both: the single uniform is drawn first in
            // both code paths, so the multisets must agree exactly.
            let mut rng_a = stream_rng(6, seed);
            let mut rng_b = stream_rng(6, seed);
            let mut adj = adjacent_resample(&refs, &w, &mut rng_a).unwrap();
            let mut sys = systematic_resample(&w, &mut rng_b).unwrap();
            adj.sort_unstable();
            sys.sort_unstable();
            assert_eq!(adj, sys);
        }
    }

    #[test]
    fn adjacent_pairs_mostly_distinct_on_spread_cloud() {
        let mut rng = stream_rng(5, 123);
        let n = 1000;
        let pts: Vec<Vec<f64>> = (0..n)
            .map(|_| vec![rng.random::<f64>() * 10.0, rng.random::<f64>() * 10.0])
            .collect();
        let refs: Vec<&[f64]> = pts.iter().map(|p| p.as_slice()).collect();
        let w = vec![1.0 / n as f64; n];
        let idx = adjacent_resample(&refs, &w, &mut rng).unwrap();
        let distinct = (0..n / 2)
            .filter(|&k| idx[2 * k] != idx[2 * k + 1])
            .count() as f64
            / (n / 2) as f64;
        assert!(distinct >= 0.8, "distinct pair fraction {distinct}");
    }

    #[test]
    fn ess_known_values() {
        assert!((ess(&[0.25; 4]) - 4.0).abs() < 1e-12);
        assert!((ess(&[1.0, 0.0, 0.0]) - 1.0).abs() < 1e-12);
        assert!((ess(&[0.5, 0.25, 0.25]) - 8.0 / 3.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn systematic_counts_within_one_of_expected(raw in proptest::collection::vec(0.01f64..1.0, 2..12), u in 0.0f64..1.0) {
            let total: f64 = raw.iter().sum();
            let w: Vec<f64> = raw.iter().map(|x| x / total).collect();
            let idx = systematic_resample_with(&w, u).unwrap();
            let mut counts = vec![0i64; w.len()];
            for &i in &idx { counts[i] += 1; }
            let n = w.len() as f64;
            for i in 0..w.len() {
                let expect = n * w[i];
                prop_assert!(counts[i] as f64 >= expect.floor() - 1e-9);
                prop_assert!(counts[i] as f64 <= expect.ceil() + 1.0 + 1e-9);
            }
        }

        #[test]
        fn adjacent_multiset_matches_systematic(raw in proptest::collection::vec(0.01f64..1.0, 4..16), seed in 0u64..1000) {
            let total: f64 = raw.iter().sum();
            let w: Vec<f64> = raw.iter().map(|x| x / total).collect();
            let pts: Vec<Vec<f64>> = (0..w.len()).map(|i| vec![i as f64]).collect();
            let refs: Vec<&[f64]> = pts.iter().map(|p| p.as_slice()).collect();
            let mut rng_a = stream_rng(9, seed);
            let mut rng_b = stream_rng(9, seed);
            let mut adj = adjacent_resample(&refs, &w, &mut rng_a).unwrap();
            let mut sys = systematic_resample(&w, &mut rng_b).unwrap();
            adj.sort_unstable();
            sys.sort_unstable();
            prop_assert_eq!(adj, sys);
        }
    }
}
