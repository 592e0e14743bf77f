//! Backward kernels and the samplers that drive them.
//!
//! A backward kernel `B_t` is a random `N x N` Markov matrix whose row `i_t`
//! selects an index at time `t - 1` given index `i_t` at time `t`. Rows are
//! stored dense (the exact smoothing rows), sparse (genealogy tracking,
//! Monte Carlo rows, coupling-based rows) or left implicit and sampled on
//! the fly (Metropolis-Hastings moves, rejection samplers in offline mode).
//!
//! Cost convention: one [`CostCounter`] unit is one evaluation of the
//! transition density on a new argument pair. The value
//! `m_t(X_{t-1}^{A_t^n}, X_t^n)` at the filter's own ancestor counts as
//! cached (models can produce it as a by-product of the forward move), so a
//! Metropolis-Hastings step costs exactly one unit.

use rand::RngExt as _;
use rand::Rng;

use crate::cost::{CostCounter, MeetingStats};
use crate::error::{Result, SmcError};
use crate::fk::{FeynmanKacModel, ParticleCloud, State};
use crate::numeric::log_sum_exp;
use crate::resample::adjacent_resample;
use crate::sampler::{sample_unnormalized, DiscreteSampler};

/// One row of a backward kernel.
#[derive(Debug, Clone)]
pub enum KernelRow {
    /// Full probability row over `0..N`.
    Dense(Vec<f64>),
    /// Support list `(index, probability)`; indices are distinct.
    Sparse(Vec<(usize, f64)>),
}

impl KernelRow {
    /// Number of support points.
    pub fn support_size(&self) -> usize {
        match self {
            KernelRow::Dense(p) => p.iter().filter(|&&x| x > 0.0).count(),
            KernelRow::Sparse(s) => s.len(),
        }
    }

    /// Probability mass on `j`.
    pub fn prob(&self, j: usize) -> f64 {
        match self {
            KernelRow::Dense(p) => p[j],
            KernelRow::Sparse(s) => s
                .iter()
                .find(|(i, _)| *i == j)
                .map(|(_, p)| *p)
                .unwrap_or(0.0),
        }
    }

    /// Iterate over `(index, probability)` pairs with positive mass.
    pub fn entries(&self) -> KernelRowIter<'_> {
        match self {
            KernelRow::Dense(p) => KernelRowIter::Dense(p.iter().enumerate()),
            KernelRow::Sparse(s) => KernelRowIter::Sparse(s.iter()),
        }
    }

    pub fn sample(&self, rng: &mut dyn Rng) -> usize {
        match self {
            KernelRow::Dense(p) => sample_unnormalized(p, 1.0, rng),
            KernelRow::Sparse(s) => {
                let u = rng.random::<f64>();
                let mut acc = 0.0;
                for &(i, p) in s {
                    acc += p;
                    if u < acc {
                        return i;
                    }
                }
                s.last().map(|&(i, _)| i).unwrap_or(0)
            }
        }
    }

    fn total_mass(&self) -> f64 {
        match self {
            KernelRow::Dense(p) => p.iter().sum(),
            KernelRow::Sparse(s) => s.iter().map(|(_, p)| p).sum(),
        }
    }
}

/// Iterator over the positive entries of a row.
pub enum KernelRowIter<'a> {
    Dense(std::iter::Enumerate<std::slice::Iter<'a, f64>>),
    Sparse(std::slice::Iter<'a, (usize, f64)>),
}

impl Iterator for KernelRowIter<'_> {
    type Item = (usize, f64);

    fn next(&mut self) -> Option<(usize, f64)> {
        match self {
            KernelRowIter::Dense(it) => it.next().map(|(i, &p)| (i, p)),
            KernelRowIter::Sparse(it) => it.next().map(|&(i, p)| (i, p)),
        }
    }
}

/// A materialised backward kernel for one time step.
#[derive(Debug, Clone)]
pub struct BackwardKernel {
    /// The kernel maps indices at time `t` to indices at time `t - 1`.
    pub t: usize,
    rows: Vec<KernelRow>,
}

impl BackwardKernel {
    pub fn new(t: usize, rows: Vec<KernelRow>) -> Self {
        Self { t, rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, i: usize) -> &KernelRow {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[KernelRow] {
        &self.rows
    }

    /// Check that every row is a probability vector and that sparse rows
    /// carry distinct, in-range indices.
    pub fn validate(&self, n_prev: usize) -> Result<()> {
        for row in &self.rows {
            let mass = row.total_mass();
            if (mass - 1.0).abs() > 1e-12 {
                return Err(SmcError::InvalidWeights(format!(
                    "kernel row mass {mass} at time {}",
                    self.t
                )));
            }
            match row {
                KernelRow::Dense(p) => {
                    if p.len() != n_prev || p.iter().any(|&x| x < 0.0 || !x.is_finite()) {
                        return Err(SmcError::InvalidWeights("bad dense row".into()));
                    }
                }
                KernelRow::Sparse(s) => {
                    for (k, &(i, p)) in s.iter().enumerate() {
                        if i >= n_prev || p < 0.0 || !p.is_finite() {
                            return Err(SmcError::InvalidWeights("bad sparse row".into()));
                        }
                        if s[..k].iter().any(|&(j, _)| j == i) {
                            return Err(SmcError::InvalidWeights(
                                "duplicate support index".into(),
                            ));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Anything an offline smoother can draw backward indices from.
pub trait SampleBackward {
    /// Number of rows (particles at time `t`).
    fn n_rows(&self) -> usize;

    /// Draw an index at `t - 1` from row `i_t`.
    fn sample_prev(&self, i_t: usize, rng: &mut dyn Rng) -> Result<usize>;
}

impl SampleBackward for BackwardKernel {
    fn n_rows(&self) -> usize {
        self.len()
    }

    fn sample_prev(&self, i_t: usize, rng: &mut dyn Rng) -> Result<usize> {
        Ok(self.rows[i_t].sample(rng))
    }
}

fn log_m_or_unsupported<M: FeynmanKacModel>(
    model: &M,
    t: usize,
    prev: &M::State,
    next: &M::State,
) -> Result<f64> {
    model
        .log_transition_density(t, prev, next)
        .ok_or(SmcError::Unsupported("transition density"))
}

/// Unnormalised log masses `log W_{t-1}^i + log m_t(X_{t-1}^i, x_t)` of one
/// smoothing row. Costs `N` density evaluations.
fn ffbs_log_masses<M: FeynmanKacModel>(
    model: &M,
    cloud_prev: &ParticleCloud<M::State>,
    x_t: &M::State,
    counter: &CostCounter,
) -> Result<Vec<f64>> {
    let t = cloud_prev.t + 1;
    let mut masses = Vec::with_capacity(cloud_prev.len());
    for (xi, &wi) in cloud_prev.states.iter().zip(&cloud_prev.weights) {
        let log_m = log_m_or_unsupported(model, t, xi, x_t)?;
        masses.push(if wi > 0.0 { wi.ln() + log_m } else { f64::NEG_INFINITY });
    }
    counter.add_evals(cloud_prev.len() as u64);
    Ok(masses)
}

/// Dense smoothing row: probability of index `i` proportional to
/// `W_{t-1}^i m_t(X_{t-1}^i, x_t)`. Costs `N` density evaluations.
pub fn ffbs_row<M: FeynmanKacModel>(
    model: &M,
    cloud_prev: &ParticleCloud<M::State>,
    x_t: &M::State,
    counter: &CostCounter,
) -> Result<Vec<f64>> {
    let masses = ffbs_log_masses(model, cloud_prev, x_t, counter)?;
    let lse = log_sum_exp(&masses);
    if lse == f64::NEG_INFINITY {
        return Err(SmcError::DegenerateKernel { t: cloud_prev.t + 1 });
    }
    let mut row: Vec<f64> = masses.iter().map(|&m| (m - lse).exp()).collect();
    let total: f64 = row.iter().sum();
    for p in &mut row {
        *p /= total;
    }
    Ok(row)
}

/// The dense kernel of one time step: every row of [`ffbs_row`] for the
/// states of `cloud_cur`. Costs `N^2` density evaluations.
pub fn ffbs_dense_kernel<M: FeynmanKacModel>(
    model: &M,
    cloud_prev: &ParticleCloud<M::State>,
    cloud_cur: &ParticleCloud<M::State>,
    counter: &CostCounter,
) -> Result<BackwardKernel> {
    let rows = cloud_cur
        .states
        .iter()
        .map(|x_t| ffbs_row(model, cloud_prev, x_t, counter).map(KernelRow::Dense))
        .collect::<Result<Vec<_>>>()?;
    Ok(BackwardKernel::new(cloud_cur.t, rows))
}

/// Exact draw from an already materialised probability row.
pub fn sample_row(row: &[f64], rng: &mut dyn Rng) -> usize {
    sample_unnormalized(row, 1.0, rng)
}

/// Exact draw from the smoothing row for `x_t`, building the row on the
/// fly. Costs `N` density evaluations.
pub fn sample_ffbs_direct<M: FeynmanKacModel>(
    model: &M,
    cloud_prev: &ParticleCloud<M::State>,
    x_t: &M::State,
    counter: &CostCounter,
    rng: &mut dyn Rng,
) -> Result<usize> {
    let masses = ffbs_log_masses(model, cloud_prev, x_t, counter)?;
    let lse = log_sum_exp(&masses);
    if lse == f64::NEG_INFINITY {
        return Err(SmcError::DegenerateKernel { t: cloud_prev.t + 1 });
    }
    let linear: Vec<f64> = masses.iter().map(|&m| (m - lse).exp()).collect();
    let total: f64 = linear.iter().sum();
    Ok(sample_unnormalized(&linear, total, rng))
}

/// Pure rejection sampler for the smoothing row: propose ancestors from the
/// pre-initialised multinomial sampler and accept with probability
/// `m_t / bound`. The returned index is exactly row-distributed; the trial
/// count is geometric given the skeleton.
pub fn sample_ffbs_pure_rejection<M: FeynmanKacModel>(
    model: &M,
    cloud_prev: &ParticleCloud<M::State>,
    x_t: &M::State,
    proposal: &DiscreteSampler,
    counter: &CostCounter,
    rng: &mut dyn Rng,
) -> Result<usize> {
    let t = cloud_prev.t + 1;
    let log_bound = model
        .log_transition_bound(t)
        .ok_or(SmcError::Unsupported("transition density bound"))?;
    let mut trials: u64 = 0;
    loop {
        let candidate = proposal.sample(rng);
        trials += 1;
        let log_m = log_m_or_unsupported(model, t, &cloud_prev.states[candidate], x_t)?;
        counter.add_evals(1);
        if log_m > log_bound + 1e-9 {
            return Err(SmcError::BoundViolation {
                t,
                log_m,
                log_bound,
            });
        }
        if rng.random::<f64>().ln() <= log_m - log_bound {
            counter.record_rejection_draw(trials);
            return Ok(candidate);
        }
    }
}

/// Hybrid rejection sampler: at most `k_max` rejection trials, then one
/// exact direct draw. The marginal law equals the smoothing row for any
/// stopping rule. The fallback recomputes the full row and counts `N`
/// additional evaluations.
pub fn sample_ffbs_hybrid<M: FeynmanKacModel>(
    model: &M,
    cloud_prev: &ParticleCloud<M::State>,
    x_t: &M::State,
    proposal: &DiscreteSampler,
    counter: &CostCounter,
    k_max: usize,
    rng: &mut dyn Rng,
) -> Result<usize> {
    let t = cloud_prev.t + 1;
    let log_bound = model
        .log_transition_bound(t)
        .ok_or(SmcError::Unsupported("transition density bound"))?;
    for trial in 1..=k_max as u64 {
        let candidate = proposal.sample(rng);
        let log_m = log_m_or_unsupported(model, t, &cloud_prev.states[candidate], x_t)?;
        counter.add_evals(1);
        if log_m > log_bound + 1e-9 {
            return Err(SmcError::BoundViolation {
                t,
                log_m,
                log_bound,
            });
        }
        if rng.random::<f64>().ln() <= log_m - log_bound {
            counter.record_rejection_draw(trial);
            return Ok(candidate);
        }
    }
    counter.record_rejection_draw(k_max as u64);
    sample_ffbs_direct(model, cloud_prev, x_t, counter, rng)
}

/// Which sampler realises draws from the smoothing row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackwardSamplerKind {
    /// Exact `O(N)` draw.
    Direct,
    /// Rejection sampling with no trial cap.
    PureRejection,
    /// Rejection sampling capped at `k` trials (`None` means `k = N`),
    /// then an exact draw.
    Hybrid { k: Option<usize> },
}

/// Genealogy-tracking kernel: row `i_t` is a point mass at the stored
/// ancestor. Costs nothing.
pub fn gt_kernel<S: State>(cloud: &ParticleCloud<S>) -> Result<BackwardKernel> {
    let ancestors = cloud
        .ancestors
        .as_ref()
        .ok_or(SmcError::Unsupported("genealogy tracking without ancestors"))?;
    let rows = ancestors
        .iter()
        .map(|&a| KernelRow::Sparse(vec![(a, 1.0)]))
        .collect();
    Ok(BackwardKernel::new(cloud.t, rows))
}

fn sparse_from_draws(draws: &[usize]) -> KernelRow {
    let weight = 1.0 / draws.len() as f64;
    let mut support: Vec<(usize, f64)> = Vec::with_capacity(draws.len());
    for &j in draws {
        match support.iter_mut().find(|(i, _)| *i == j) {
            Some((_, p)) => *p += weight,
            None => support.push((j, weight)),
        }
    }
    KernelRow::Sparse(support)
}

/// Sparse Monte Carlo estimate of the dense kernel: row `n` averages
/// `n_tilde` conditionally i.i.d. draws from the smoothing row of
/// `X_t^n`. Unbiased for the dense kernel, with at most `n_tilde` support
/// points per row.
pub fn paris_kernel<M: FeynmanKacModel>(
    model: &M,
    cloud_prev: &ParticleCloud<M::State>,
    cloud_cur: &ParticleCloud<M::State>,
    n_tilde: usize,
    kind: BackwardSamplerKind,
    proposal: &DiscreteSampler,
    counter: &CostCounter,
    rng: &mut dyn Rng,
) -> Result<BackwardKernel> {
    assert!(n_tilde >= 1, "n_tilde must be at least 1");
    let n = cloud_cur.len();
    let mut rows = Vec::with_capacity(n);
    let mut draws = vec![0usize; n_tilde];
    for x_t in &cloud_cur.states {
        match kind {
            BackwardSamplerKind::Direct => {
                // Build the row once, reuse it for all draws.
                let row = ffbs_row(model, cloud_prev, x_t, counter)?;
                for d in draws.iter_mut() {
                    *d = sample_row(&row, rng);
                }
            }
            BackwardSamplerKind::PureRejection => {
                for d in draws.iter_mut() {
                    *d = sample_ffbs_pure_rejection(model, cloud_prev, x_t, proposal, counter, rng)?;
                }
            }
            BackwardSamplerKind::Hybrid { k } => {
                let k_max = k.unwrap_or(cloud_prev.len());
                for d in draws.iter_mut() {
                    *d = sample_ffbs_hybrid(model, cloud_prev, x_t, proposal, counter, k_max, rng)?;
                }
            }
        }
        rows.push(sparse_from_draws(&draws));
    }
    Ok(BackwardKernel::new(cloud_cur.t, rows))
}

/// Independent Metropolis-Hastings move on backward indices.
///
/// Runs `n_steps` steps of the chain started at `a_t`, targeting the
/// smoothing row of `x_t` with proposal `M(W_{t-1})`: a proposal `p` is
/// accepted with probability `min(1, m_t(X^p, x_t) / m_t(X^cur, x_t))`.
/// Each step costs one counted density evaluation; the starting value is
/// treated as cached.
pub fn imh_backward_sample<M: FeynmanKacModel>(
    model: &M,
    cloud_prev: &ParticleCloud<M::State>,
    x_t: &M::State,
    a_t: usize,
    n_steps: usize,
    proposal: &DiscreteSampler,
    counter: &CostCounter,
    rng: &mut dyn Rng,
) -> Result<usize> {
    let mut chain = ImhChain::start(model, cloud_prev, x_t, a_t)?;
    for _ in 0..n_steps {
        chain.step(model, cloud_prev, x_t, proposal, counter, rng)?;
    }
    Ok(chain.current)
}

/// Running state of one independent MH chain on indices.
struct ImhChain {
    current: usize,
    log_m_current: f64,
}

impl ImhChain {
    fn start<M: FeynmanKacModel>(
        model: &M,
        cloud_prev: &ParticleCloud<M::State>,
        x_t: &M::State,
        a_t: usize,
    ) -> Result<Self> {
        // Cached filtering-time value: evaluated but not counted.
        let log_m_current =
            log_m_or_unsupported(model, cloud_prev.t + 1, &cloud_prev.states[a_t], x_t)?;
        Ok(Self {
            current: a_t,
            log_m_current,
        })
    }

    fn step<M: FeynmanKacModel>(
        &mut self,
        model: &M,
        cloud_prev: &ParticleCloud<M::State>,
        x_t: &M::State,
        proposal: &DiscreteSampler,
        counter: &CostCounter,
        rng: &mut dyn Rng,
    ) -> Result<()> {
        let t = cloud_prev.t + 1;
        let candidate = proposal.sample(rng);
        let log_m_candidate =
            log_m_or_unsupported(model, t, &cloud_prev.states[candidate], x_t)?;
        counter.add_evals(1);
        let log_ratio = log_m_candidate - self.log_m_current;
        // NaN (0/0) rejects; +inf accepts.
        let accept = log_ratio >= 0.0 || rng.random::<f64>().ln() <= log_ratio;
        if accept {
            self.current = candidate;
            self.log_m_current = log_m_candidate;
        }
        Ok(())
    }
}

/// Sparse MH kernel for online use: row `i_t` averages the `n_tilde` states
/// of an independent MH chain started at the filtering ancestor
/// (`n_tilde - 1` MH steps per row).
pub fn imhp_kernel<M: FeynmanKacModel>(
    model: &M,
    cloud_prev: &ParticleCloud<M::State>,
    cloud_cur: &ParticleCloud<M::State>,
    n_tilde: usize,
    proposal: &DiscreteSampler,
    counter: &CostCounter,
    rng: &mut dyn Rng,
) -> Result<BackwardKernel> {
    assert!(n_tilde >= 2, "n_tilde must be at least 2 for a stable kernel");
    let ancestors = cloud_cur
        .ancestors
        .as_ref()
        .ok_or(SmcError::Unsupported("MH kernel without ancestors"))?;
    let mut rows = Vec::with_capacity(cloud_cur.len());
    let mut visited = vec![0usize; n_tilde];
    for (x_t, &a_t) in cloud_cur.states.iter().zip(ancestors) {
        let mut chain = ImhChain::start(model, cloud_prev, x_t, a_t)?;
        visited[0] = a_t;
        for v in visited.iter_mut().skip(1) {
            chain.step(model, cloud_prev, x_t, proposal, counter, rng)?;
            *v = chain.current;
        }
        rows.push(sparse_from_draws(&visited));
    }
    Ok(BackwardKernel::new(cloud_cur.t, rows))
}

/// Implicit kernel that samples backward indices by running MH chains on
/// demand; used by the offline smoother where materialising dense MH rows
/// would be wasteful.
pub struct ImhKernel<'a, M: FeynmanKacModel> {
    model: &'a M,
    cloud_prev: &'a ParticleCloud<M::State>,
    cloud_cur: &'a ParticleCloud<M::State>,
    proposal: DiscreteSampler,
    n_steps: usize,
    counter: &'a CostCounter,
}

impl<'a, M: FeynmanKacModel> ImhKernel<'a, M> {
    pub fn new(
        model: &'a M,
        cloud_prev: &'a ParticleCloud<M::State>,
        cloud_cur: &'a ParticleCloud<M::State>,
        n_steps: usize,
        counter: &'a CostCounter,
    ) -> Result<Self> {
        if cloud_cur.ancestors.is_none() {
            return Err(SmcError::Unsupported("MH kernel without ancestors"));
        }
        Ok(Self {
            model,
            cloud_prev,
            cloud_cur,
            proposal: DiscreteSampler::new(&cloud_prev.weights)?,
            n_steps,
            counter,
        })
    }
}

impl<M: FeynmanKacModel> SampleBackward for ImhKernel<'_, M> {
    fn n_rows(&self) -> usize {
        self.cloud_cur.len()
    }

    fn sample_prev(&self, i_t: usize, rng: &mut dyn Rng) -> Result<usize> {
        let a_t = self.cloud_cur.ancestors.as_ref().unwrap()[i_t];
        imh_backward_sample(
            self.model,
            self.cloud_prev,
            &self.cloud_cur.states[i_t],
            a_t,
            self.n_steps,
            &self.proposal,
            self.counter,
            rng,
        )
    }
}

/// Implicit smoothing-row kernel for offline trajectory sampling, drawing
/// with the configured sampler instead of materialising rows.
pub struct FfbsSamplingKernel<'a, M: FeynmanKacModel> {
    model: &'a M,
    cloud_prev: &'a ParticleCloud<M::State>,
    cloud_cur: &'a ParticleCloud<M::State>,
    proposal: DiscreteSampler,
    kind: BackwardSamplerKind,
    counter: &'a CostCounter,
}

impl<'a, M: FeynmanKacModel> FfbsSamplingKernel<'a, M> {
    pub fn new(
        model: &'a M,
        cloud_prev: &'a ParticleCloud<M::State>,
        cloud_cur: &'a ParticleCloud<M::State>,
        kind: BackwardSamplerKind,
        counter: &'a CostCounter,
    ) -> Result<Self> {
        Ok(Self {
            model,
            cloud_prev,
            cloud_cur,
            proposal: DiscreteSampler::new(&cloud_prev.weights)?,
            kind,
            counter,
        })
    }
}

impl<M: FeynmanKacModel> SampleBackward for FfbsSamplingKernel<'_, M> {
    fn n_rows(&self) -> usize {
        self.cloud_cur.len()
    }

    fn sample_prev(&self, i_t: usize, rng: &mut dyn Rng) -> Result<usize> {
        let x_t = &self.cloud_cur.states[i_t];
        match self.kind {
            BackwardSamplerKind::Direct => {
                sample_ffbs_direct(self.model, self.cloud_prev, x_t, self.counter, rng)
            }
            BackwardSamplerKind::PureRejection => sample_ffbs_pure_rejection(
                self.model,
                self.cloud_prev,
                x_t,
                &self.proposal,
                self.counter,
                rng,
            ),
            BackwardSamplerKind::Hybrid { k } => sample_ffbs_hybrid(
                self.model,
                self.cloud_prev,
                x_t,
                &self.proposal,
                self.counter,
                self.kind_cap(k),
                rng,
            ),
        }
    }
}

impl<M: FeynmanKacModel> FfbsSamplingKernel<'_, M> {
    fn kind_cap(&self, k: Option<usize>) -> usize {
        k.unwrap_or(self.cloud_prev.len())
    }
}

fn pair_row(a1: usize, a2: usize) -> KernelRow {
    if a1 == a2 {
        KernelRow::Sparse(vec![(a1, 1.0)])
    } else {
        KernelRow::Sparse(vec![(a1, 0.5), (a2, 0.5)])
    }
}

/// Modified forward pass for intractable models: each particle draws a
/// coupled ancestor pair and a coupled move, keeps one endpoint at random,
/// and its backward row holds both ancestors when the moves met.
///
/// No transition density is required; the coupled transition sampler of the
/// model does all the work. Meeting statistics are recorded in `stats`.
pub fn itr_forward_step<M: FeynmanKacModel>(
    model: &M,
    cloud_prev: &ParticleCloud<M::State>,
    stats: &MeetingStats,
    rng: &mut dyn Rng,
) -> Result<(ParticleCloud<M::State>, BackwardKernel)> {
    let t = cloud_prev.t + 1;
    let n = cloud_prev.len();
    let proposal = DiscreteSampler::new(&cloud_prev.weights)?;
    let mut states = Vec::with_capacity(n);
    let mut ancestors = Vec::with_capacity(n);
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let a1 = proposal.sample(rng);
        let a2 = proposal.sample(rng);
        let (x1, x2) = model
            .sample_coupled_transition(t, &cloud_prev.states[a1], &cloud_prev.states[a2], rng)
            .ok_or(SmcError::Unsupported("coupled transition sampler"))?;
        let take_first = rng.random::<bool>();
        let met = x1 == x2;
        stats.record(met);
        let (a_kept, x_kept) = if take_first { (a1, x1) } else { (a2, x2) };
        rows.push(if met { pair_row(a1, a2) } else { pair_row(a_kept, a_kept) });
        ancestors.push(a_kept);
        states.push(x_kept);
    }
    let log_weights: Vec<f64> = states.iter().map(|x| model.log_potential(t, x)).collect();
    let cloud = ParticleCloud::from_log_weights(t, states, &log_weights, Some(ancestors))?;
    Ok((cloud, BackwardKernel::new(t, rows)))
}

/// Conditionally-correlated variant: ancestors come from the adjacent
/// resampler, each consecutive pair of slots is moved by one coupled
/// transition, and both endpoints are kept as distinct particles.
pub fn itrc_forward_step<M: FeynmanKacModel>(
    model: &M,
    cloud_prev: &ParticleCloud<M::State>,
    stats: &MeetingStats,
    rng: &mut dyn Rng,
) -> Result<(ParticleCloud<M::State>, BackwardKernel)> {
    let t = cloud_prev.t + 1;
    let n = cloud_prev.len();
    if n % 2 != 0 {
        return Err(SmcError::DimensionMismatch(
            "conditionally-correlated step requires an even number of particles".into(),
        ));
    }
    let coords: Vec<&[f64]> = cloud_prev.states.iter().map(|s| s.coords()).collect();
    let ancestors = adjacent_resample(&coords, &cloud_prev.weights, rng)?;
    let mut states: Vec<M::State> = Vec::with_capacity(n);
    let mut rows = Vec::with_capacity(n);
    for k in 0..n / 2 {
        let a1 = ancestors[2 * k];
        let a2 = ancestors[2 * k + 1];
        let (x1, x2) = model
            .sample_coupled_transition(t, &cloud_prev.states[a1], &cloud_prev.states[a2], rng)
            .ok_or(SmcError::Unsupported("coupled transition sampler"))?;
        let met = x1 == x2;
        stats.record(met);
        if met {
            rows.push(pair_row(a1, a2));
            rows.push(pair_row(a1, a2));
        } else {
            rows.push(pair_row(a1, a1));
            rows.push(pair_row(a2, a2));
        }
        states.push(x1);
        states.push(x2);
    }
    let log_weights: Vec<f64> = states.iter().map(|x| model.log_potential(t, x)).collect();
    let cloud = ParticleCloud::from_log_weights(t, states, &log_weights, Some(ancestors))?;
    Ok((cloud, BackwardKernel::new(t, rows)))
}
