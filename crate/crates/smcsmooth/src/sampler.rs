//! Constant-time sampling from a fixed discrete distribution.
//!
//! [`DiscreteSampler`] is an alias table (Vose's method): `O(N)` setup then
//! `O(1)` per draw. [`CdfSampler`] is the straightforward inversion of the
//! cumulative distribution with binary search; it is kept as an independent
//! reference implementation and for one-shot draws.

use rand::RngExt as _;
use rand::Rng;

use crate::error::{Result, SmcError};

/// Check that `weights` is a probability vector (within `tol` of summing
/// to one).
pub fn validate_simplex(weights: &[f64], tol: f64) -> Result<()> {
    if weights.is_empty() {
        return Err(SmcError::InvalidWeights("empty weight vector".into()));
    }
    let mut sum = 0.0;
    for &w in weights {
        if !w.is_finite() || w < 0.0 {
            return Err(SmcError::InvalidWeights(format!("weight {w} is invalid")));
        }
        sum += w;
    }
    if (sum - 1.0).abs() > tol {
        return Err(SmcError::InvalidWeights(format!(
            "weights sum to {sum}, expected 1"
        )));
    }
    Ok(())
}

/// Alias-table sampler for a multinomial distribution on `0..N`.
#[derive(Debug, Clone)]
pub struct DiscreteSampler {
    weights: Vec<f64>,
    prob: Vec<f64>,
    alias: Vec<usize>,
}

impl DiscreteSampler {
    /// Build the alias table. Weights must lie on the probability simplex.
    pub fn new(weights: &[f64]) -> Result<Self> {
        validate_simplex(weights, 1e-9)?;
        let n = weights.len();
        let mut prob: Vec<f64> = weights.iter().map(|w| w * n as f64).collect();
        let mut alias: Vec<usize> = (0..n).collect();

        let mut small: Vec<usize> = Vec::with_capacity(n);
        let mut large: Vec<usize> = Vec::with_capacity(n);
        for (i, &p) in prob.iter().enumerate() {
            if p < 1.0 {
                small.push(i);
            } else {
                large.push(i);
            }
        }
        while let (Some(s), Some(l)) = (small.pop(), large.pop()) {
            alias[s] = l;
            prob[l] = (prob[l] + prob[s]) - 1.0;
            if prob[l] < 1.0 {
                small.push(l);
            } else {
                large.push(l);
            }
        }
        // Leftovers are 1.0 up to rounding.
        for i in small.into_iter().chain(large) {
            prob[i] = 1.0;
        }
        Ok(Self {
            weights: weights.to_vec(),
            prob,
            alias,
        })
    }

    /// Number of categories.
    pub fn len(&self) -> usize {
        self.prob.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prob.is_empty()
    }

    /// The weights this table was built from.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// One draw in `O(1)`.
    #[inline]
    pub fn sample(&self, rng: &mut dyn Rng) -> usize {
        let n = self.prob.len();
        let i = rng.random_range(0..n);
        if rng.random::<f64>() < self.prob[i] {
            i
        } else {
            self.alias[i]
        }
    }
}

/// CDF-inversion sampler: `O(N)` setup, `O(log N)` per draw.
#[derive(Debug, Clone)]
pub struct CdfSampler {
    cumulative: Vec<f64>,
}

impl CdfSampler {
    pub fn new(weights: &[f64]) -> Result<Self> {
        validate_simplex(weights, 1e-9)?;
        let mut cumulative = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for &w in weights {
            acc += w;
            cumulative.push(acc);
        }
        if let Some(last) = cumulative.last_mut() {
            *last = 1.0;
        }
        Ok(Self { cumulative })
    }

    /// Index of the unique bracket containing `u` in `[0, 1)`.
    #[inline]
    pub fn index_of(&self, u: f64) -> usize {
        self.cumulative.partition_point(|&c| c <= u).min(self.cumulative.len() - 1)
    }

    #[inline]
    pub fn sample(&self, rng: &mut dyn Rng) -> usize {
        self.index_of(rng.random::<f64>())
    }
}

/// One-shot categorical draw from unnormalised non-negative masses.
///
/// Linear scan; used where the masses are already at hand and a single draw
/// is needed (e.g. the hybrid sampler's fallback).
pub fn sample_unnormalized(masses: &[f64], total: f64, rng: &mut dyn Rng) -> usize {
    debug_assert!(total > 0.0);
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, &m) in masses.iter().enumerate() {
        acc += m;
        if u < acc {
            return i;
        }
    }
    masses.len() - 1
}
