//! Shared test oracles: small exact computations that the particle
//! machinery is checked against. Everything here is independent of the
//! implementation paths it validates.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::RngExt as _;
use smcsmooth::backward::BackwardKernel;
use smcsmooth::fk::{FeynmanKacModel, ParticleCloud};
use smcsmooth::models::LinearGaussianModel;
use statrs::distribution::{ChiSquared, ContinuousCDF};

// ---------------------------------------------------------------------
// Two-state hidden Markov model with exact forward recursion
// ---------------------------------------------------------------------

/// Discrete HMM with two states and two observation symbols.
pub struct DiscreteHmm {
    pub transition: [[f64; 2]; 2],
    pub emission: [[f64; 2]; 2],
    pub initial: [f64; 2],
    pub observations: Vec<usize>,
}

impl DiscreteHmm {
    pub fn example(observations: Vec<usize>) -> Self {
        Self {
            transition: [[0.7, 0.3], [0.2, 0.8]],
            emission: [[0.9, 0.1], [0.35, 0.65]],
            initial: [0.6, 0.4],
            observations,
        }
    }

    /// Simulate an observation record of length `horizon + 1`.
    pub fn simulate(&self, horizon: usize, rng: &mut dyn Rng) -> Vec<usize> {
        let mut obs = Vec::with_capacity(horizon + 1);
        let mut state = usize::from(rng.random::<f64>() > self.initial[0]);
        for _ in 0..=horizon {
            obs.push(usize::from(rng.random::<f64>() > self.emission[state][0]));
            state = usize::from(rng.random::<f64>() > self.transition[state][0]);
        }
        obs
    }

    /// Exact normalised forward recursion: per-time filter probabilities
    /// of state 1, and the log likelihood.
    pub fn forward_oracle(&self) -> (Vec<f64>, f64) {
        let mut filter_means = Vec::with_capacity(self.observations.len());
        let mut log_likelihood = 0.0;
        let mut alpha = [0.0f64; 2];
        for (t, &y) in self.observations.iter().enumerate() {
            let mut unnorm = [0.0f64; 2];
            for s in 0..2 {
                let predictive = if t == 0 {
                    self.initial[s]
                } else {
                    alpha[0] * self.transition[0][s] + alpha[1] * self.transition[1][s]
                };
                unnorm[s] = predictive * self.emission[s][y];
            }
            let c = unnorm[0] + unnorm[1];
            log_likelihood += c.ln();
            alpha = [unnorm[0] / c, unnorm[1] / c];
            filter_means.push(alpha[1]);
        }
        (filter_means, log_likelihood)
    }
}

impl FeynmanKacModel for DiscreteHmm {
    type State = [f64; 1];

    fn horizon(&self) -> usize {
        self.observations.len() - 1
    }

    fn sample_initial(&self, rng: &mut dyn Rng) -> [f64; 1] {
        [f64::from(rng.random::<f64>() > self.initial[0])]
    }

    fn sample_transition(&self, _t: usize, prev: &[f64; 1], rng: &mut dyn Rng) -> [f64; 1] {
        let s = prev[0] as usize;
        [f64::from(rng.random::<f64>() > self.transition[s][0])]
    }

    fn log_potential(&self, t: usize, x: &[f64; 1]) -> f64 {
        self.emission[x[0] as usize][self.observations[t]].ln()
    }

    fn log_transition_density(&self, _t: usize, prev: &[f64; 1], next: &[f64; 1]) -> Option<f64> {
        Some(self.transition[prev[0] as usize][next[0] as usize].ln())
    }

    fn log_transition_bound(&self, _t: usize) -> Option<f64> {
        let max = self
            .transition
            .iter()
            .flatten()
            .cloned()
            .fold(0.0f64, f64::max);
        Some(max.ln())
    }
}

// ---------------------------------------------------------------------
// Fixed skeletons and a toy model with a controllable transition density
// ---------------------------------------------------------------------

/// Model over scalar states whose transition density is an arbitrary
/// positive function; used to build fixed skeletons for kernel tests.
pub struct ToyDensityModel<F: Fn(f64, f64) -> f64 + Send + Sync> {
    pub horizon: usize,
    /// `m(x_prev, x_next)`, must be positive and bounded by `bound`.
    pub density: F,
    pub bound: f64,
}

impl<F: Fn(f64, f64) -> f64 + Send + Sync> FeynmanKacModel for ToyDensityModel<F> {
    type State = [f64; 1];

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn sample_initial(&self, rng: &mut dyn Rng) -> [f64; 1] {
        [rng.random::<f64>()]
    }

    fn sample_transition(&self, _t: usize, prev: &[f64; 1], rng: &mut dyn Rng) -> [f64; 1] {
        [prev[0] + rng.random::<f64>() - 0.5]
    }

    fn log_potential(&self, _t: usize, _x: &[f64; 1]) -> f64 {
        0.0
    }

    fn log_transition_density(&self, _t: usize, prev: &[f64; 1], next: &[f64; 1]) -> Option<f64> {
        Some((self.density)(prev[0], next[0]).ln())
    }

    fn log_transition_bound(&self, _t: usize) -> Option<f64> {
        Some(self.bound.ln())
    }
}

/// Hand-built particle slice.
pub fn make_cloud(
    t: usize,
    states: Vec<f64>,
    weights: Vec<f64>,
    ancestors: Option<Vec<usize>>,
) -> ParticleCloud<[f64; 1]> {
    assert_eq!(states.len(), weights.len());
    let total: f64 = weights.iter().sum();
    ParticleCloud {
        t,
        states: states.into_iter().map(|x| [x]).collect(),
        weights: weights.into_iter().map(|w| w / total).collect(),
        ancestors,
        log_likelihood_increment: 0.0,
    }
}

/// Deterministic pseudo-random skeleton of scalar clouds `0..=horizon`
/// with ancestors, for kernel tests.
pub fn random_skeleton(
    n: usize,
    horizon: usize,
    rng: &mut dyn Rng,
) -> Vec<ParticleCloud<[f64; 1]>> {
    let mut clouds = Vec::with_capacity(horizon + 1);
    for t in 0..=horizon {
        let states: Vec<f64> = (0..n).map(|_| 4.0 * rng.random::<f64>() - 2.0).collect();
        let raw: Vec<f64> = (0..n).map(|_| 0.2 + rng.random::<f64>()).collect();
        let ancestors =
            (t > 0).then(|| (0..n).map(|_| rng.random_range(0..n)).collect::<Vec<_>>());
        clouds.push(make_cloud(t, states, raw, ancestors));
    }
    clouds
}

// ---------------------------------------------------------------------
// Exhaustive enumeration of the joint backward index law
// ---------------------------------------------------------------------

/// Probability of each full index path `i_{0:T}` under terminal weights
/// and dense kernels, with the path expectation of an arbitrary function.
/// Only usable for tiny `N` and `T`.
pub fn enumerate_path_law(
    terminal_weights: &[f64],
    kernels: &[BackwardKernel],
    mut visit: impl FnMut(&[usize], f64),
) {
    let n = terminal_weights.len();
    let horizon = kernels.len();
    let total_paths = n.pow(horizon as u32 + 1);
    let mut path = vec![0usize; horizon + 1];
    for code in 0..total_paths {
        let mut c = code;
        for slot in path.iter_mut() {
            *slot = c % n;
            c /= n;
        }
        let mut prob = terminal_weights[path[horizon]];
        for t in (1..=horizon).rev() {
            prob *= kernels[t - 1].row(path[t]).prob(path[t - 1]);
        }
        if prob > 0.0 {
            visit(&path, prob);
        }
    }
}

// ---------------------------------------------------------------------
// Joint-Gaussian conditioning oracle for linear Gaussian smoothing
// ---------------------------------------------------------------------

/// Smoothing moments computed by building the joint normal distribution of
/// all states and observations and conditioning on the observations.
pub struct JointConditioningOracle {
    pub means: Vec<DVector<f64>>,
    pub covs: Vec<DMatrix<f64>>,
}

pub fn joint_conditioning_oracle(
    model: &LinearGaussianModel,
    observations: &[DVector<f64>],
) -> JointConditioningOracle {
    let horizon = observations.len() - 1;
    let dx = model.dim_x();
    let dy = model.dim_y();
    let sx = (horizon + 1) * dx;
    let sy = (horizon + 1) * dy;

    // State means and pairwise covariances.
    let mut state_mean = vec![model.mu0.clone()];
    for t in 1..=horizon {
        let prev = state_mean[t - 1].clone();
        state_mean.push(&model.fx * prev);
    }
    let mut state_cov = vec![vec![DMatrix::<f64>::zeros(dx, dx); horizon + 1]; horizon + 1];
    state_cov[0][0] = model.sigma0.clone();
    for t in 1..=horizon {
        let prev = state_cov[t - 1][t - 1].clone();
        state_cov[t][t] = &model.fx * prev * model.fx.transpose() + &model.cx;
    }
    for s in 0..=horizon {
        for t in s + 1..=horizon {
            let prev = state_cov[s][t - 1].clone();
            state_cov[s][t] = prev * model.fx.transpose();
            state_cov[t][s] = state_cov[s][t].transpose();
        }
    }

    // Assemble joint covariance over (all states, all observations).
    let mut joint = DMatrix::<f64>::zeros(sx + sy, sx + sy);
    for s in 0..=horizon {
        for t in 0..=horizon {
            let xx = &state_cov[s][t];
            joint.view_mut((s * dx, t * dx), (dx, dx)).copy_from(xx);
            let xy = xx * model.fy.transpose();
            joint
                .view_mut((s * dx, sx + t * dy), (dx, dy))
                .copy_from(&xy);
            joint
                .view_mut((sx + t * dy, s * dx), (dy, dx))
                .copy_from(&xy.transpose());
            let mut yy = &model.fy * xx * model.fy.transpose();
            if s == t {
                yy += &model.cy;
            }
            joint
                .view_mut((sx + s * dy, sx + t * dy), (dy, dy))
                .copy_from(&yy);
        }
    }

    let mut mean_x = DVector::<f64>::zeros(sx);
    let mut mean_y = DVector::<f64>::zeros(sy);
    let mut obs_vec = DVector::<f64>::zeros(sy);
    for t in 0..=horizon {
        mean_x.rows_mut(t * dx, dx).copy_from(&state_mean[t]);
        mean_y
            .rows_mut(t * dy, dy)
            .copy_from(&(&model.fy * &state_mean[t]));
        obs_vec.rows_mut(t * dy, dy).copy_from(&observations[t]);
    }

    let sigma_xx = joint.view((0, 0), (sx, sx)).into_owned();
    let sigma_xy = joint.view((0, sx), (sx, sy)).into_owned();
    let sigma_yy = joint.view((sx, sx), (sy, sy)).into_owned();
    let chol = sigma_yy.cholesky().expect("observation covariance is SPD");
    let weight = chol.solve(&(obs_vec - mean_y));
    let cond_mean = mean_x + &sigma_xy * weight;
    let cond_cov = &sigma_xx - &sigma_xy * chol.solve(&sigma_xy.transpose());

    let means = (0..=horizon)
        .map(|t| cond_mean.rows(t * dx, dx).into_owned())
        .collect();
    let covs = (0..=horizon)
        .map(|t| cond_cov.view((t * dx, t * dx), (dx, dx)).into_owned())
        .collect();
    JointConditioningOracle { means, covs }
}

/// Stationary covariance of `x_t = F x_{t-1} + noise` by fixed-point
/// iteration of the discrete Lyapunov equation.
pub fn lyapunov_stationary_cov(fx: &DMatrix<f64>, cx: &DMatrix<f64>) -> DMatrix<f64> {
    let mut sigma = cx.clone();
    for _ in 0..500 {
        sigma = fx * &sigma * fx.transpose() + cx;
    }
    sigma
}

// ---------------------------------------------------------------------
// Goodness-of-fit helpers
// ---------------------------------------------------------------------

/// Chi-square goodness-of-fit p-value of observed counts against expected
/// probabilities.
pub fn chi_square_pvalue(counts: &[u64], probs: &[f64]) -> f64 {
    assert_eq!(counts.len(), probs.len());
    let total: u64 = counts.iter().sum();
    let mut statistic = 0.0;
    let mut dof = 0usize;
    for (&c, &p) in counts.iter().zip(probs) {
        let expected = total as f64 * p;
        if expected < 1e-12 {
            assert_eq!(c, 0, "observed mass where the law has none");
            continue;
        }
        statistic += (c as f64 - expected).powi(2) / expected;
        dof += 1;
    }
    let chi = ChiSquared::new((dof - 1) as f64).unwrap();
    1.0 - chi.cdf(statistic)
}

/// Kolmogorov-Smirnov statistic of a sample against a CDF.
pub fn ks_statistic(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = samples.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in samples.iter().enumerate() {
        let f = cdf(x);
        d = d.max((f - i as f64 / n).abs());
        d = d.max(((i + 1) as f64 / n - f).abs());
    }
    d
}

/// Asymptotic KS critical value at level `alpha`.
pub fn ks_critical(n: usize, alpha: f64) -> f64 {
    ((2.0 / alpha).ln() / 2.0).sqrt() / (n as f64).sqrt()
}

/// Two-sample KS distance between empirical laws.
pub fn ks_two_sample(a: &mut [f64], b: &mut [f64]) -> f64 {
    a.sort_by(|x, y| x.partial_cmp(y).unwrap());
    b.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            i += 1;
        } else {
            j += 1;
        }
        let fa = i as f64 / a.len() as f64;
        let fb = j as f64 / b.len() as f64;
        d = d.max((fa - fb).abs());
    }
    d
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64, mean: f64, sd: f64) -> f64 {
    use statrs::distribution::Normal;
    Normal::new(mean, sd).unwrap().cdf(x)
}

// ---------------------------------------------------------------------
// Numerical quadrature
// ---------------------------------------------------------------------

fn simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
}

fn adaptive_simpson_rec(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> f64 {
    let m = 0.5 * (a + b);
    let left = simpson(f, a, m);
    let right = simpson(f, m, b);
    if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
        left + right + (left + right - whole) / 15.0
    } else {
        adaptive_simpson_rec(f, a, m, left, tol / 2.0, depth - 1)
            + adaptive_simpson_rec(f, m, b, right, tol / 2.0, depth - 1)
    }
}

/// Adaptive Simpson quadrature on `[a, b]`.
pub fn adaptive_quadrature(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let whole = simpson(&f, a, b);
    adaptive_simpson_rec(&f, a, b, whole, tol, 40)
}

/// Total variation distance between two densities on `[a, b]` via the
/// overlap integral `1 - int min(f, g)`.
pub fn tv_distance_1d(
    f: impl Fn(f64) -> f64,
    g: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    tol: f64,
) -> f64 {
    1.0 - adaptive_quadrature(|x| f(x).min(g(x)), a, b, tol)
}

// ---------------------------------------------------------------------
// Exact independent-MH transition matrix
// ---------------------------------------------------------------------

/// One-step Metropolis-Hastings transition matrix on indices, with
/// proposal `proposal_weights` and target proportional to
/// `proposal_weights[i] * density[i]`: a proposed index `p` is accepted
/// from `c` with probability `min(1, density[p] / density[c])`.
pub fn imh_transition_matrix(proposal_weights: &[f64], density: &[f64]) -> DMatrix<f64> {
    let n = proposal_weights.len();
    let mut k = DMatrix::<f64>::zeros(n, n);
    for c in 0..n {
        let mut off_diagonal = 0.0;
        for p in 0..n {
            if p == c {
                continue;
            }
            let accept = (density[p] / density[c]).min(1.0);
            k[(c, p)] = proposal_weights[p] * accept;
            off_diagonal += k[(c, p)];
        }
        k[(c, c)] = 1.0 - off_diagonal;
    }
    k
}

/// The normalised target row of [`imh_transition_matrix`].
pub fn ffbs_row_oracle(proposal_weights: &[f64], density: &[f64]) -> Vec<f64> {
    let raw: Vec<f64> = proposal_weights
        .iter()
        .zip(density)
        .map(|(w, m)| w * m)
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}
