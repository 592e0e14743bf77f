//! Stochastic Lotka-Volterra predator-prey model with Euler-discretised
//! dynamics, log-scale Gaussian observations, and coupled transitions for
//! the intractable-density smoothers.

use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::coupling::{
    couple_gaussians, euler_step_params, std_normal_vector, GaussianCoupler, MvGaussian,
    SampleDensity,
};
use crate::error::{Result, SmcError};
use crate::fk::FeynmanKacModel;

/// Prey/predator SDE
/// `dX(0) = [b0 X(0) - t0 X(0)^2 / 2 - t1 X(0) X(1)] dt + X(0) dE(0)`,
/// `dX(1) = [-b1 X(1) + t1 X(0) X(1)] dt + X(1) dE(1)`,
/// with `E = Gamma W`. Observations are the log populations plus Gaussian
/// noise at integer times.
#[derive(Debug)]
pub struct LotkaVolterraSde {
    pub beta0: f64,
    pub beta1: f64,
    pub tau0: f64,
    pub tau1: f64,
    pub gamma: DMatrix<f64>,
    pub obs_cov: DMatrix<f64>,
    pub init_mean: DVector<f64>,
    pub init_cov: DMatrix<f64>,
    /// Euler substeps per unit observation interval.
    pub n_steps: usize,
    /// Populations are clamped at this floor after each substep.
    pub floor: f64,
    clamp_count: AtomicU64,
}

impl LotkaVolterraSde {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        beta0: f64,
        beta1: f64,
        tau0: f64,
        tau1: f64,
        noise_cov: DMatrix<f64>,
        obs_cov: DMatrix<f64>,
        init_mean: DVector<f64>,
        init_cov: DMatrix<f64>,
        n_steps: usize,
    ) -> Result<Self> {
        if beta0 <= 0.0 || beta1 <= 0.0 || tau0 <= 0.0 || tau1 <= 0.0 {
            return Err(SmcError::Config("rate parameters must be positive".into()));
        }
        if n_steps == 0 {
            return Err(SmcError::Config("need at least one euler substep".into()));
        }
        let gamma = noise_cov
            .clone()
            .cholesky()
            .ok_or(SmcError::NotPositiveDefinite("environmental noise covariance"))?
            .l();
        if obs_cov.clone().cholesky().is_none() || init_cov.clone().cholesky().is_none() {
            return Err(SmcError::NotPositiveDefinite("observation or initial covariance"));
        }
        Ok(Self {
            beta0,
            beta1,
            tau0,
            tau1,
            gamma,
            obs_cov,
            init_mean,
            init_cov,
            n_steps,
            floor: 1e-6,
            clamp_count: AtomicU64::new(0),
        })
    }

    /// Benchmark configuration whose drift vanishes at the stationary
    /// population vector `[100, 100]`.
    pub fn benchmark(n_steps: usize) -> Self {
        Self::new(
            0.3125,
            0.25,
            1.0 / 800.0,
            1.0 / 400.0,
            DMatrix::from_vec(2, 2, vec![0.01, 0.005, 0.005, 0.01]),
            DMatrix::from_vec(2, 2, vec![0.04, 0.02, 0.02, 0.04]),
            DVector::from_vec(vec![100.0, 100.0]),
            DMatrix::from_vec(2, 2, vec![100.0, 50.0, 50.0, 100.0]),
            n_steps,
        )
        .expect("benchmark parameters are valid")
    }

    /// Drift of the SDE at population vector `x`.
    pub fn drift(&self, x: &DVector<f64>) -> DVector<f64> {
        let (prey, pred) = (x[0], x[1]);
        DVector::from_vec(vec![
            self.beta0 * prey - 0.5 * self.tau0 * prey * prey - self.tau1 * prey * pred,
            -self.beta1 * pred + self.tau1 * prey * pred,
        ])
    }

    /// Diffusion matrix `diag(x) Gamma`.
    pub fn diffusion(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut m = self.gamma.clone();
        for i in 0..2 {
            for j in 0..2 {
                m[(i, j)] *= x[i];
            }
        }
        m
    }

    /// Number of times a sub-step crossed zero and was clamped.
    pub fn clamp_count(&self) -> u64 {
        self.clamp_count.load(Ordering::Relaxed)
    }

    fn clamp(&self, x: &mut DVector<f64>) {
        for v in x.iter_mut() {
            if *v < self.floor {
                *v = self.floor;
                self.clamp_count.fetch_add(1, Ordering::Relaxed);
            }
        }
    }

    fn substep_params(&self, x: &DVector<f64>, delta: f64) -> Result<MvGaussian> {
        euler_step_params(&|y| self.drift(y), &|y| self.diffusion(y), x, delta)
    }

    /// Euler transition over one unit observation interval.
    pub fn euler_transition(&self, x: &DVector<f64>, rng: &mut dyn Rng) -> Result<DVector<f64>> {
        let delta = 1.0 / self.n_steps as f64;
        let mut cur = x.clone();
        for _ in 0..self.n_steps {
            cur = self.substep_params(&cur, delta)?.sample(rng);
            self.clamp(&mut cur);
        }
        Ok(cur)
    }

    /// Coupled Euler transition over one unit interval with the selected
    /// per-substep coupler; both chains apply the same positivity clamp, so
    /// each marginal is exactly the law of [`Self::euler_transition`].
    pub fn coupled_euler_transition(
        &self,
        xa: &DVector<f64>,
        xb: &DVector<f64>,
        coupler: GaussianCoupler,
        rng: &mut dyn Rng,
    ) -> Result<(DVector<f64>, DVector<f64>)> {
        let delta = 1.0 / self.n_steps as f64;
        let mut a = xa.clone();
        let mut b = xb.clone();
        for _ in 0..self.n_steps {
            if a == b {
                a = self.substep_params(&a, delta)?.sample(rng);
                self.clamp(&mut a);
                b = a.clone();
            } else {
                let pa = self.substep_params(&a, delta)?;
                let pb = self.substep_params(&b, delta)?;
                let pair = couple_gaussians(coupler, &pa, &pb, rng);
                a = pair.left;
                b = pair.right;
                self.clamp(&mut a);
                self.clamp(&mut b);
            }
        }
        Ok((a, b))
    }

    /// Forward-simulate states and log-scale observations at integer times
    /// `0..=horizon`.
    pub fn simulate_data(
        &self,
        horizon: usize,
        rng: &mut dyn Rng,
    ) -> Result<(Vec<DVector<f64>>, Vec<DVector<f64>>)> {
        let l_obs = self.obs_cov.clone().cholesky().unwrap().l();
        let l_init = self.init_cov.clone().cholesky().unwrap().l();
        let mut x = &self.init_mean + &l_init * std_normal_vector(2, rng);
        self.clamp(&mut x);
        let mut states = Vec::with_capacity(horizon + 1);
        let mut obs = Vec::with_capacity(horizon + 1);
        for _ in 0..=horizon {
            let log_x = DVector::from_vec(vec![x[0].ln(), x[1].ln()]);
            obs.push(log_x + &l_obs * std_normal_vector(2, rng));
            states.push(x.clone());
            x = self.euler_transition(&x, rng)?;
        }
        Ok((states, obs))
    }
}

/// Feynman-Kac form of the Lotka-Volterra model for a fixed observation
/// record. The transition density is intractable; only sampling (plain and
/// coupled) is exposed.
pub struct LvFeynmanKac {
    model: LotkaVolterraSde,
    observations: Vec<DVector<f64>>,
    l_init: DMatrix<f64>,
    obs_prec: DMatrix<f64>,
    log_g_const: f64,
    coupler: GaussianCoupler,
}

impl LvFeynmanKac {
    pub fn new(model: LotkaVolterraSde, observations: Vec<DVector<f64>>) -> Result<Self> {
        if observations.is_empty() {
            return Err(SmcError::DimensionMismatch("no observations".into()));
        }
        let chol = model
            .obs_cov
            .clone()
            .cholesky()
            .ok_or(SmcError::NotPositiveDefinite("observation covariance"))?;
        let obs_prec = chol.inverse();
        let log_det: f64 = chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>() * 2.0;
        let log_g_const = -(2.0 * std::f64::consts::PI).ln() - 0.5 * log_det;
        let l_init = model.init_cov.clone().cholesky().unwrap().l();
        Ok(Self {
            l_init,
            obs_prec,
            log_g_const,
            model,
            observations,
            coupler: GaussianCoupler::Mlr,
        })
    }

    pub fn model(&self) -> &LotkaVolterraSde {
        &self.model
    }

    pub fn observations(&self) -> &[DVector<f64>] {
        &self.observations
    }
}

impl FeynmanKacModel for LvFeynmanKac {
    type State = DVector<f64>;

    fn horizon(&self) -> usize {
        self.observations.len() - 1
    }

    fn sample_initial(&self, rng: &mut dyn Rng) -> DVector<f64> {
        let mut x = &self.model.init_mean + &self.l_init * std_normal_vector(2, rng);
        self.model.clamp(&mut x);
        x
    }

    fn sample_transition(&self, _t: usize, prev: &DVector<f64>, rng: &mut dyn Rng) -> DVector<f64> {
        self.model
            .euler_transition(prev, rng)
            .expect("euler transition from a clamped state is finite")
    }

    fn log_potential(&self, t: usize, x: &DVector<f64>) -> f64 {
        let r = DVector::from_vec(vec![
            self.observations[t][0] - x[0].max(self.model.floor).ln(),
            self.observations[t][1] - x[1].max(self.model.floor).ln(),
        ]);
        self.log_g_const - 0.5 * (&self.obs_prec * &r).dot(&r)
    }

    fn sample_coupled_transition(
        &self,
        _t: usize,
        prev_a: &DVector<f64>,
        prev_b: &DVector<f64>,
        rng: &mut dyn Rng,
    ) -> Option<(DVector<f64>, DVector<f64>)> {
        let pair = self
            .model
            .coupled_euler_transition(prev_a, prev_b, self.coupler, rng)
            .expect("coupled euler transition from clamped states is finite");
        Some(pair)
    }
}
