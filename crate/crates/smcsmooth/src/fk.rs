//! Feynman-Kac model abstraction and forward particle filters.

use rand::Rng;

use crate::error::{Result, SmcError};
use crate::numeric::log_sum_exp;
use crate::resample::{
    adjacent_resample, multinomial_resample, systematic_resample, ResamplingScheme,
};

/// A particle state: clonable, comparable for exact equality (meeting
/// detection) and embeddable in `R^d` for spatial sorting.
pub trait State: Clone + PartialEq + Send + Sync + 'static {
    fn coords(&self) -> &[f64];
}

impl State for Vec<f64> {
    fn coords(&self) -> &[f64] {
        self
    }
}

impl<const D: usize> State for [f64; D] {
    fn coords(&self) -> &[f64] {
        self
    }
}

impl State for nalgebra::DVector<f64> {
    fn coords(&self) -> &[f64] {
        self.as_slice()
    }
}

/// A Feynman-Kac model: initial law, Markov transitions and potentials,
/// with optional extras (transition density and its upper bound, a guided
/// proposal, a coupled transition sampler) that unlock specific algorithms.
///
/// Time conventions: `sample_transition(t, ..)` is the kernel taking a state
/// at `t - 1` to a state at `t` (so `t >= 1`), and `log_potential(t, ..)` is
/// `log G_t` for `t >= 0`.
pub trait FeynmanKacModel: Send + Sync {
    type State: State;

    /// Final time index `T`; the model covers times `0..=T`.
    fn horizon(&self) -> usize;

    fn sample_initial(&self, rng: &mut dyn Rng) -> Self::State;

    fn sample_transition(
        &self,
        t: usize,
        prev: &Self::State,
        rng: &mut dyn Rng,
    ) -> Self::State;

    fn log_potential(&self, t: usize, x: &Self::State) -> f64;

    /// `log m_t(prev, next)`, when the transition density is tractable.
    fn log_transition_density(
        &self,
        _t: usize,
        _prev: &Self::State,
        _next: &Self::State,
    ) -> Option<f64> {
        None
    }

    /// `log` of an upper bound on `m_t`, when available.
    fn log_transition_bound(&self, _t: usize) -> Option<f64> {
        None
    }

    /// Draw from the guided proposal `q_t(. | prev)`, when available.
    fn sample_guided(
        &self,
        _t: usize,
        _prev: &Self::State,
        _rng: &mut dyn Rng,
    ) -> Option<Self::State> {
        None
    }

    /// `log q_t(next | prev)` for the guided proposal.
    fn log_guided_density(
        &self,
        _t: usize,
        _prev: &Self::State,
        _next: &Self::State,
    ) -> Option<f64> {
        None
    }

    /// Draw a coupled pair `(X, X')` whose marginals are the transitions
    /// from `prev_a` and `prev_b`. Meeting must produce literally identical
    /// states. `None` when the model has no coupled sampler.
    fn sample_coupled_transition(
        &self,
        _t: usize,
        _prev_a: &Self::State,
        _prev_b: &Self::State,
        _rng: &mut dyn Rng,
    ) -> Option<(Self::State, Self::State)> {
        None
    }
}

/// One time slice of a particle filter.
#[derive(Debug, Clone)]
pub struct ParticleCloud<S> {
    /// Time index of this slice.
    pub t: usize,
    pub states: Vec<S>,
    /// Normalised weights on the probability simplex.
    pub weights: Vec<f64>,
    /// Ancestor indices into the slice at `t - 1`; `None` at `t = 0`.
    pub ancestors: Option<Vec<usize>>,
    /// `log` of the likelihood increment estimate `l_t^N`.
    pub log_likelihood_increment: f64,
}

impl<S: State> ParticleCloud<S> {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Effective sample size of the weights.
    pub fn ess(&self) -> f64 {
        crate::resample::ess(&self.weights)
    }

    /// Weighted mean of a scalar function of the state.
    pub fn weighted_mean(&self, f: impl Fn(&S) -> f64) -> f64 {
        self.states
            .iter()
            .zip(&self.weights)
            .map(|(s, w)| w * f(s))
            .sum()
    }

    /// Check every structural invariant; used by tests and after each step
    /// in debug builds.
    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        let mut sum = 0.0;
        for &w in &self.weights {
            if !w.is_finite() || w < 0.0 {
                return Err(SmcError::InvalidWeights(format!("weight {w}")));
            }
            sum += w;
        }
        if (sum - 1.0).abs() > 1e-12 {
            return Err(SmcError::InvalidWeights(format!("weights sum to {sum}")));
        }
        if let Some(anc) = &self.ancestors {
            if anc.len() != n {
                return Err(SmcError::DimensionMismatch("ancestor vector length".into()));
            }
            if anc.iter().any(|&a| a >= n) {
                return Err(SmcError::DimensionMismatch("ancestor index out of range".into()));
            }
        }
        if !self.log_likelihood_increment.is_finite() {
            return Err(SmcError::NonFinite {
                context: "log likelihood increment".into(),
            });
        }
        Ok(())
    }

    /// Normalise log potentials into weights and the likelihood increment.
    pub(crate) fn from_log_weights(
        t: usize,
        states: Vec<S>,
        log_weights: &[f64],
        ancestors: Option<Vec<usize>>,
    ) -> Result<Self> {
        let n = log_weights.len();
        if log_weights.iter().any(|w| w.is_nan()) {
            return Err(SmcError::NonFinite {
                context: format!("particle weights at time {t}"),
            });
        }
        let lse = log_sum_exp(log_weights);
        if lse == f64::NEG_INFINITY {
            return Err(SmcError::DegenerateWeights { t });
        }
        let mut weights: Vec<f64> = log_weights.iter().map(|&lw| (lw - lse).exp()).collect();
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        let cloud = Self {
            t,
            states,
            weights,
            ancestors,
            log_likelihood_increment: lse - (n as f64).ln(),
        };
        debug_assert!(cloud.validate().is_ok());
        Ok(cloud)
    }
}

fn resample_ancestors<S: State>(
    cloud: &ParticleCloud<S>,
    scheme: ResamplingScheme,
    rng: &mut dyn Rng,
) -> Result<Vec<usize>> {
    match scheme {
        ResamplingScheme::Multinomial => {
            multinomial_resample(&cloud.weights, cloud.len(), rng)
        }
        ResamplingScheme::Systematic => systematic_resample(&cloud.weights, rng),
        ResamplingScheme::Adjacent => {
            let coords: Vec<&[f64]> = cloud.states.iter().map(|s| s.coords()).collect();
            adjacent_resample(&coords, &cloud.weights, rng)
        }
    }
}

/// Initial slice of the bootstrap filter: draw from the initial law and
/// weight by `G_0`.
pub fn init_cloud<M: FeynmanKacModel>(
    model: &M,
    n_particles: usize,
    rng: &mut dyn Rng,
) -> Result<ParticleCloud<M::State>> {
    let states: Vec<M::State> = (0..n_particles).map(|_| model.sample_initial(rng)).collect();
    let log_weights: Vec<f64> = states.iter().map(|x| model.log_potential(0, x)).collect();
    ParticleCloud::from_log_weights(0, states, &log_weights, None)
}

/// One step of the bootstrap filter: resample, move through `M_t`, reweight
/// by `G_t`.
pub fn bootstrap_step<M: FeynmanKacModel>(
    model: &M,
    cloud: &ParticleCloud<M::State>,
    scheme: ResamplingScheme,
    rng: &mut dyn Rng,
) -> Result<ParticleCloud<M::State>> {
    let t = cloud.t + 1;
    let ancestors = resample_ancestors(cloud, scheme, rng)?;
    let states: Vec<M::State> = ancestors
        .iter()
        .map(|&a| model.sample_transition(t, &cloud.states[a], rng))
        .collect();
    let log_weights: Vec<f64> = states.iter().map(|x| model.log_potential(t, x)).collect();
    ParticleCloud::from_log_weights(t, states, &log_weights, Some(ancestors))
}

/// One step of the guided filter: resample, move through the proposal and
/// weight by `G_t m_t / q_t`.
pub fn guided_step<M: FeynmanKacModel>(
    model: &M,
    cloud: &ParticleCloud<M::State>,
    scheme: ResamplingScheme,
    rng: &mut dyn Rng,
) -> Result<ParticleCloud<M::State>> {
    let t = cloud.t + 1;
    let ancestors = resample_ancestors(cloud, scheme, rng)?;
    let mut states = Vec::with_capacity(cloud.len());
    let mut log_weights = Vec::with_capacity(cloud.len());
    for &a in &ancestors {
        let prev = &cloud.states[a];
        let next = model
            .sample_guided(t, prev, rng)
            .ok_or(SmcError::Unsupported("guided proposal"))?;
        let log_m = model
            .log_transition_density(t, prev, &next)
            .ok_or(SmcError::Unsupported("transition density"))?;
        let log_q = model
            .log_guided_density(t, prev, &next)
            .ok_or(SmcError::Unsupported("guided proposal density"))?;
        log_weights.push(model.log_potential(t, &next) + log_m - log_q);
        states.push(next);
    }
    ParticleCloud::from_log_weights(t, states, &log_weights, Some(ancestors))
}

/// Which forward filter to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterKind {
    Bootstrap,
    Guided,
}

/// One filter step of the requested kind.
pub fn filter_step<M: FeynmanKacModel>(
    model: &M,
    cloud: &ParticleCloud<M::State>,
    kind: FilterKind,
    scheme: ResamplingScheme,
    rng: &mut dyn Rng,
) -> Result<ParticleCloud<M::State>> {
    match kind {
        FilterKind::Bootstrap => bootstrap_step(model, cloud, scheme, rng),
        FilterKind::Guided => guided_step(model, cloud, scheme, rng),
    }
}

/// Run a full filter pass over `0..=T`, returning every slice.
pub fn run_filter<M: FeynmanKacModel>(
    model: &M,
    n_particles: usize,
    kind: FilterKind,
    scheme: ResamplingScheme,
    rng: &mut dyn Rng,
) -> Result<Vec<ParticleCloud<M::State>>> {
    let mut clouds = Vec::with_capacity(model.horizon() + 1);
    clouds.push(init_cloud(model, n_particles, rng)?);
    for _ in 1..=model.horizon() {
        let next = filter_step(model, clouds.last().unwrap(), kind, scheme, rng)?;
        clouds.push(next);
    }
    Ok(clouds)
}

/// Total log likelihood estimate over stored slices.
pub fn log_likelihood<S>(clouds: &[ParticleCloud<S>]) -> f64 {
    clouds.iter().map(|c| c.log_likelihood_increment).sum()
}
