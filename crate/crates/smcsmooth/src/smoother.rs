//! Generic offline trajectory sampling and the exact online recursion for
//! additive functions, both driven by any backward kernel.

use rand::Rng;

use crate::backward::{paris_kernel, BackwardKernel, BackwardSamplerKind, SampleBackward};
use crate::cost::CostCounter;
use crate::error::{Result, SmcError};
use crate::fk::{bootstrap_step, init_cloud, FeynmanKacModel, ParticleCloud, State};
use crate::numeric::CompensatedSum;
use crate::resample::ResamplingScheme;
use crate::sampler::DiscreteSampler;

/// An additive function `phi_t(x_{0:t}) = psi_0(x_0) + sum_{s<=t} psi_s(x_{s-1}, x_s)`.
pub trait AdditiveFunction<S>: Send + Sync {
    /// `psi_0(x_0)`.
    fn initial(&self, x0: &S) -> f64;

    /// `psi_t(x_{t-1}, x_t)` for `t >= 1`.
    fn term(&self, t: usize, x_prev: &S, x_cur: &S) -> f64;
}

/// Sum over time of a function of the current state:
/// `phi_t(x_{0:t}) = sum_s f(x_s)`.
pub struct PerStateSum<F>(pub F);

impl<S, F: Fn(&S) -> f64 + Send + Sync> AdditiveFunction<S> for PerStateSum<F> {
    fn initial(&self, x0: &S) -> f64 {
        (self.0)(x0)
    }

    fn term(&self, _t: usize, _x_prev: &S, x_cur: &S) -> f64 {
        (self.0)(x_cur)
    }
}

/// The running vector of partial additive-function expectations.
#[derive(Debug, Clone)]
pub struct SmoothingStatVector {
    pub t: usize,
    pub values: Vec<f64>,
}

impl SmoothingStatVector {
    /// Initial vector `S_0[n] = psi_0(X_0^n)`.
    pub fn initial<S>(cloud: &ParticleCloud<S>, psi: &dyn AdditiveFunction<S>) -> Self {
        Self {
            t: 0,
            values: cloud.states.iter().map(|x| psi.initial(x)).collect(),
        }
    }
}

/// One index path with its realised states.
#[derive(Debug, Clone)]
pub struct TrajectoryDraw<S> {
    pub indices: Vec<usize>,
    pub states: Vec<S>,
}

impl<S> TrajectoryDraw<S> {
    /// Partial sums `phi_t` of an additive function along the path.
    pub fn partial_sums(&self, psi: &dyn AdditiveFunction<S>) -> Vec<f64> {
        let mut acc = CompensatedSum::new();
        acc.add(psi.initial(&self.states[0]));
        let mut out = Vec::with_capacity(self.states.len());
        out.push(acc.value());
        for t in 1..self.states.len() {
            acc.add(psi.term(t, &self.states[t - 1], &self.states[t]));
            out.push(acc.value());
        }
        out
    }
}

/// One step of the online recursion:
/// `S_t[i] = sum_j B_t[i, j] (S_{t-1}[j] + psi_t(X_{t-1}^j, X_t^i))`.
///
/// Cost is proportional to the total row support.
pub fn online_update<S: State>(
    stats_prev: &SmoothingStatVector,
    kernel: &BackwardKernel,
    psi: &dyn AdditiveFunction<S>,
    cloud_prev: &ParticleCloud<S>,
    cloud_cur: &ParticleCloud<S>,
) -> Result<SmoothingStatVector> {
    let n = cloud_cur.len();
    if stats_prev.values.len() != cloud_prev.len() || kernel.len() != n {
        return Err(SmcError::DimensionMismatch(format!(
            "online update: stats {}, kernel {}, clouds {}/{}",
            stats_prev.values.len(),
            kernel.len(),
            cloud_prev.len(),
            n
        )));
    }
    let t = cloud_cur.t;
    let mut values = Vec::with_capacity(n);
    for (i, x_cur) in cloud_cur.states.iter().enumerate() {
        let mut acc = CompensatedSum::new();
        for (j, p) in kernel.row(i).entries() {
            if p == 0.0 {
                continue;
            }
            let contribution = stats_prev.values[j] + psi.term(t, &cloud_prev.states[j], x_cur);
            acc.add(p * contribution);
        }
        values.push(acc.value());
    }
    Ok(SmoothingStatVector { t, values })
}

/// The online estimate `sum_n W_t^n S_t[n]` of the additive expectation.
pub fn additive_estimate<S>(cloud: &ParticleCloud<S>, stats: &SmoothingStatVector) -> f64 {
    let mut acc = CompensatedSum::new();
    for (w, s) in cloud.weights.iter().zip(&stats.values) {
        acc.add(w * s);
    }
    acc.value()
}

/// Generic offline smoother: draw `n_traj` conditionally i.i.d. index paths
/// from the terminal weights and the backward kernels, and materialise the
/// corresponding state paths.
///
/// `kernels[t - 1]` must be the kernel mapping indices at time `t` to
/// indices at time `t - 1`.
pub fn offline_smoother<S: State, K: SampleBackward>(
    clouds: &[ParticleCloud<S>],
    kernels: &[K],
    n_traj: usize,
    rng: &mut dyn Rng,
) -> Result<Vec<TrajectoryDraw<S>>> {
    if clouds.is_empty() || kernels.len() + 1 != clouds.len() {
        return Err(SmcError::DimensionMismatch(format!(
            "offline smoother: {} clouds, {} kernels",
            clouds.len(),
            kernels.len()
        )));
    }
    let horizon = kernels.len();
    let terminal = DiscreteSampler::new(&clouds[horizon].weights)?;
    let mut out = Vec::with_capacity(n_traj);
    for _ in 0..n_traj {
        let mut indices = vec![0usize; horizon + 1];
        indices[horizon] = terminal.sample(rng);
        for t in (1..=horizon).rev() {
            indices[t - 1] = kernels[t - 1].sample_prev(indices[t], rng)?;
        }
        let states = indices
            .iter()
            .enumerate()
            .map(|(t, &i)| clouds[t].states[i].clone())
            .collect();
        out.push(TrajectoryDraw { indices, states });
    }
    Ok(out)
}

/// Estimate of the marginal expectation of `phi_s` at a fixed time `s` from
/// offline trajectories.
pub fn fixed_marginal_estimate<S>(
    trajectories: &[TrajectoryDraw<S>],
    s: usize,
    phi: impl Fn(&S) -> f64,
) -> f64 {
    let mut acc = CompensatedSum::new();
    for traj in trajectories {
        acc.add(phi(&traj.states[s]));
    }
    acc.value() / trajectories.len() as f64
}

/// Number of distinct indices used at time `s` across trajectories; a
/// degeneracy diagnostic.
pub fn unique_index_count<S>(trajectories: &[TrajectoryDraw<S>], s: usize) -> usize {
    let mut seen: Vec<usize> = trajectories.iter().map(|tr| tr.indices[s]).collect();
    seen.sort_unstable();
    seen.dedup();
    seen.len()
}

/// Bounded store of filter slices for offline smoothing. Offline mode keeps
/// every cloud in memory, so pushes beyond the float budget are refused.
#[derive(Debug)]
pub struct CloudStore<S> {
    clouds: Vec<ParticleCloud<S>>,
    cap_floats: usize,
    used_floats: usize,
}

/// Default storage budget (number of f64 coordinates) for offline mode.
pub const DEFAULT_STORAGE_CAP: usize = 200_000_000;

impl<S: State> CloudStore<S> {
    pub fn new(cap_floats: usize) -> Self {
        Self {
            clouds: Vec::new(),
            cap_floats,
            used_floats: 0,
        }
    }

    pub fn push(&mut self, cloud: ParticleCloud<S>) -> Result<()> {
        let dim = cloud.states.first().map_or(0, |s| s.coords().len());
        let needed = self.used_floats + cloud.len() * dim;
        if needed > self.cap_floats {
            return Err(SmcError::StorageBudget {
                needed,
                cap: self.cap_floats,
            });
        }
        self.used_floats = needed;
        self.clouds.push(cloud);
        Ok(())
    }

    pub fn clouds(&self) -> &[ParticleCloud<S>] {
        &self.clouds
    }

    pub fn into_clouds(self) -> Vec<ParticleCloud<S>> {
        self.clouds
    }
}

/// Running state of the fused online smoother.
pub struct OnlineSmoother<S> {
    pub cloud: ParticleCloud<S>,
    pub stats: SmoothingStatVector,
}

impl<S: State> OnlineSmoother<S> {
    /// Initialise from the time-0 slice of a filter.
    pub fn start<M: FeynmanKacModel<State = S>>(
        model: &M,
        n_particles: usize,
        psi: &dyn AdditiveFunction<S>,
        rng: &mut dyn Rng,
    ) -> Result<(Self, f64)> {
        let cloud = init_cloud(model, n_particles, rng)?;
        let stats = SmoothingStatVector::initial(&cloud, psi);
        let estimate = additive_estimate(&cloud, &stats);
        Ok((Self { cloud, stats }, estimate))
    }

    /// One fused step: bootstrap move, sparse Monte Carlo kernel, online
    /// update. Behaves exactly as composing the primitives with the same
    /// generator.
    pub fn paris_step<M: FeynmanKacModel<State = S>>(
        &mut self,
        model: &M,
        psi: &dyn AdditiveFunction<S>,
        n_tilde: usize,
        kind: BackwardSamplerKind,
        counter: &CostCounter,
        rng: &mut dyn Rng,
    ) -> Result<f64> {
        let next = bootstrap_step(model, &self.cloud, ResamplingScheme::Multinomial, rng)?;
        let proposal = DiscreteSampler::new(&self.cloud.weights)?;
        let kernel = paris_kernel(
            model,
            &self.cloud,
            &next,
            n_tilde,
            kind,
            &proposal,
            counter,
            rng,
        )?;
        let stats = online_update(&self.stats, &kernel, psi, &self.cloud, &next)?;
        let estimate = additive_estimate(&next, &stats);
        self.cloud = next;
        self.stats = stats;
        Ok(estimate)
    }
}

/// Convenience wrapper matching the concrete one-step loop of the online
/// algorithm: returns the new state and the estimate.
pub fn paris_online_step<M: FeynmanKacModel>(
    model: &M,
    state: OnlineSmoother<M::State>,
    psi: &dyn AdditiveFunction<M::State>,
    n_tilde: usize,
    kind: BackwardSamplerKind,
    counter: &CostCounter,
    rng: &mut dyn Rng,
) -> Result<(OnlineSmoother<M::State>, f64)> {
    let mut state = state;
    let estimate = state.paris_step(model, psi, n_tilde, kind, counter, rng)?;
    Ok((state, estimate))
}
