//! Linear Gaussian state-space models, exact Kalman recursions, and the
//! Feynman-Kac wrapper that exposes them to the particle machinery.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::coupling::{rejection_maximal_coupling, std_normal_vector, MvGaussian};
use crate::error::{Result, SmcError};
use crate::fk::FeynmanKacModel;
use crate::numeric::dot;

/// Model
/// `X_t | X_{t-1} ~ N(F_X X_{t-1}, C_X)`, `Y_t | X_t ~ N(F_Y X_t, C_Y)`,
/// `X_0 ~ N(mu0, sigma0)`.
#[derive(Debug, Clone)]
pub struct LinearGaussianModel {
    pub fx: DMatrix<f64>,
    pub cx: DMatrix<f64>,
    pub fy: DMatrix<f64>,
    pub cy: DMatrix<f64>,
    pub mu0: DVector<f64>,
    pub sigma0: DMatrix<f64>,
}

impl LinearGaussianModel {
    pub fn new(
        fx: DMatrix<f64>,
        cx: DMatrix<f64>,
        fy: DMatrix<f64>,
        cy: DMatrix<f64>,
        mu0: DVector<f64>,
        sigma0: DMatrix<f64>,
    ) -> Result<Self> {
        let dx = fx.nrows();
        if fx.ncols() != dx || fy.ncols() != dx || mu0.len() != dx {
            return Err(SmcError::DimensionMismatch("linear Gaussian shapes".into()));
        }
        for (name, m) in [("C_X", &cx), ("C_Y", &cy), ("Sigma_0", &sigma0)] {
            if m.clone().cholesky().is_none() {
                let _ = name;
                return Err(SmcError::NotPositiveDefinite("model covariance"));
            }
        }
        if fx.clone().lu().determinant() == 0.0 {
            return Err(SmcError::NotPositiveDefinite("F_X must be full rank"));
        }
        Ok(Self {
            fx,
            cx,
            fy,
            cy,
            mu0,
            sigma0,
        })
    }

    pub fn dim_x(&self) -> usize {
        self.fx.nrows()
    }

    pub fn dim_y(&self) -> usize {
        self.fy.nrows()
    }

    /// Benchmark model with `F_X[i, j] = alpha^(1 + |i - j|)`, identity
    /// state noise, direct observation of the state with noise variance
    /// `sigma_y2`, and a standard normal initial law.
    pub fn benchmark(dim: usize, alpha: f64, sigma_y2: f64) -> Self {
        let fx = DMatrix::from_fn(dim, dim, |i, j| {
            alpha.powi(1 + (i as i32 - j as i32).abs())
        });
        Self::new(
            fx,
            DMatrix::identity(dim, dim),
            DMatrix::identity(dim, dim),
            sigma_y2 * DMatrix::identity(dim, dim),
            DVector::zeros(dim),
            DMatrix::identity(dim, dim),
        )
        .expect("benchmark parameters are valid")
    }

    /// Scalar model with `F_X = 0.5`, unit state noise, observation noise
    /// `sigma_y^2` and the stationary initial law (variance 4/3).
    pub fn scalar(sigma_y: f64) -> Self {
        let fx = 0.5;
        let cx = 1.0;
        Self::new(
            DMatrix::from_vec(1, 1, vec![fx]),
            DMatrix::from_vec(1, 1, vec![cx]),
            DMatrix::identity(1, 1),
            DMatrix::from_vec(1, 1, vec![sigma_y * sigma_y]),
            DVector::zeros(1),
            DMatrix::from_vec(1, 1, vec![cx / (1.0 - fx * fx)]),
        )
        .expect("scalar parameters are valid")
    }

    /// Forward-simulate states and observations for times `0..=horizon`.
    pub fn simulate_data(
        &self,
        horizon: usize,
        rng: &mut dyn Rng,
    ) -> (Vec<DVector<f64>>, Vec<DVector<f64>>) {
        let lx = self.cx.clone().cholesky().unwrap().l();
        let ly = self.cy.clone().cholesky().unwrap().l();
        let l0 = self.sigma0.clone().cholesky().unwrap().l();
        let mut states = Vec::with_capacity(horizon + 1);
        let mut obs = Vec::with_capacity(horizon + 1);
        let mut x = &self.mu0 + &l0 * std_normal_vector(self.dim_x(), rng);
        for _ in 0..=horizon {
            obs.push(&self.fy * &x + &ly * std_normal_vector(self.dim_y(), rng));
            states.push(x.clone());
            x = &self.fx * &x + &lx * std_normal_vector(self.dim_x(), rng);
        }
        (states, obs)
    }
}

/// Mean and covariance of one Gaussian marginal.
#[derive(Debug, Clone)]
pub struct GaussianMoments {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

/// Output of the forward-backward Kalman recursions.
#[derive(Debug, Clone)]
pub struct KalmanResult {
    pub predictive: Vec<GaussianMoments>,
    pub filtering: Vec<GaussianMoments>,
    pub smoothing: Vec<GaussianMoments>,
    pub log_likelihood: f64,
}

impl KalmanResult {
    /// Check the Loewner ordering smoothing <= filtering <= predictive
    /// (eigenvalues of the differences above `-1e-10`).
    pub fn validate_ordering(&self) -> Result<()> {
        for t in 0..self.predictive.len() {
            for (hi, lo) in [
                (&self.predictive[t].cov, &self.filtering[t].cov),
                (&self.filtering[t].cov, &self.smoothing[t].cov),
            ] {
                let diff = hi - lo;
                let eigs = diff.symmetric_eigenvalues();
                if eigs.iter().any(|&e| e < -1e-10) {
                    return Err(SmcError::NotPositiveDefinite(
                        "covariance ordering violated",
                    ));
                }
            }
        }
        Ok(())
    }

    /// Exact smoothing expectation of the additive benchmark function
    /// `sum_t x_t(coord)`.
    pub fn additive_target(&self, coord: usize) -> f64 {
        self.smoothing.iter().map(|m| m.mean[coord]).sum()
    }
}

/// Forward Kalman filter plus backward smoothing recursions, with the exact
/// log likelihood from the prediction-error decomposition.
pub fn kalman_filter_smoother(
    model: &LinearGaussianModel,
    observations: &[DVector<f64>],
) -> Result<KalmanResult> {
    if observations.is_empty() {
        return Err(SmcError::DimensionMismatch("no observations".into()));
    }
    let horizon = observations.len() - 1;
    let dx = model.dim_x();
    let dy = model.dim_y();
    let eye = DMatrix::<f64>::identity(dx, dx);

    let mut predictive = Vec::with_capacity(horizon + 1);
    let mut filtering = Vec::with_capacity(horizon + 1);
    let mut log_likelihood = 0.0;

    let mut mean_pred = model.mu0.clone();
    let mut cov_pred = model.sigma0.clone();
    for (t, y) in observations.iter().enumerate() {
        if t > 0 {
            let prev = &filtering[t - 1] as &GaussianMoments;
            mean_pred = &model.fx * &prev.mean;
            cov_pred = &model.fx * &prev.cov * model.fx.transpose() + &model.cx;
        }
        let innovation = y - &model.fy * &mean_pred;
        let s = &model.fy * &cov_pred * model.fy.transpose() + &model.cy;
        let chol = s
            .clone()
            .cholesky()
            .ok_or(SmcError::NotPositiveDefinite("innovation covariance"))?;
        // log N(y | F_Y mean_pred, S)
        let solved = chol.solve(&innovation);
        let log_det: f64 = chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>() * 2.0;
        log_likelihood += -0.5 * dy as f64 * (2.0 * std::f64::consts::PI).ln()
            - 0.5 * log_det
            - 0.5 * innovation.dot(&solved);

        // Gain K = cov_pred F_Y^T S^{-1}, via S K^T = F_Y cov_pred.
        let gain = chol.solve(&(&model.fy * &cov_pred)).transpose();
        let mean_filt = &mean_pred + &gain * innovation;
        // Joseph form keeps the covariance symmetric.
        let a = &eye - &gain * &model.fy;
        let cov_filt = &a * &cov_pred * a.transpose() + &gain * &model.cy * gain.transpose();

        predictive.push(GaussianMoments {
            mean: mean_pred.clone(),
            cov: cov_pred.clone(),
        });
        filtering.push(GaussianMoments {
            mean: mean_filt,
            cov: cov_filt,
        });
    }

    let mut smoothing = vec![filtering[horizon].clone(); horizon + 1];
    for t in (0..horizon).rev() {
        let pred_next = &predictive[t + 1];
        let lu = pred_next.cov.clone().lu();
        // Gain G = cov_filt F_X^T (cov_pred_next)^{-1}, via solving from the
        // right.
        let gain = lu
            .solve(&(&model.fx * &filtering[t].cov))
            .ok_or(SmcError::NotPositiveDefinite("predictive covariance"))?
            .transpose();
        let mean = &filtering[t].mean + &gain * (&smoothing[t + 1].mean - &pred_next.mean);
        let cov = &filtering[t].cov
            + &gain * (&smoothing[t + 1].cov - &pred_next.cov) * gain.transpose();
        smoothing[t] = GaussianMoments { mean, cov };
    }

    Ok(KalmanResult {
        predictive,
        filtering,
        smoothing,
        log_likelihood,
    })
}

const MAX_HOT_DIM: usize = 8;

/// Row-major matrix buffer for allocation-free quadratic forms in the hot
/// density evaluations.
#[derive(Debug, Clone)]
struct FlatMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl FlatMatrix {
    fn from(m: &DMatrix<f64>) -> Self {
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data: m.transpose().as_slice().to_vec(),
        }
    }

    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// `out[i] = (M v)[i]`.
    #[inline]
    fn matvec(&self, v: &[f64], out: &mut [f64]) {
        for i in 0..self.rows {
            out[i] = dot(self.row(i), v);
        }
    }

    /// `v^T M v` for square `M`.
    #[inline]
    fn quadform(&self, v: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.rows {
            acc += v[i] * dot(self.row(i), v);
        }
        acc
    }
}

/// Feynman-Kac form of a linear Gaussian model for a fixed observation
/// record: bootstrap ingredients, the tractable transition density and its
/// bound, the locally optimal guided proposal, and a maximal-coupling
/// transition sampler.
pub struct LgFeynmanKac {
    model: LinearGaussianModel,
    observations: Vec<DVector<f64>>,
    l0: DMatrix<f64>,
    lx: DMatrix<f64>,
    fx: FlatMatrix,
    cx_inv: FlatMatrix,
    log_m_const: f64,
    fy: FlatMatrix,
    cy_inv: FlatMatrix,
    log_g_const: f64,
    // Guided proposal N(prop_mean(x, y), prop_cov) with
    // prop_mean = prop_cov (C_X^{-1} F_X x + F_Y^T C_Y^{-1} y).
    prop_chol: DMatrix<f64>,
    prop_from_prev: FlatMatrix,
    prop_from_obs: Vec<DVector<f64>>,
    prop_prec: FlatMatrix,
    log_q_const: f64,
}

impl LgFeynmanKac {
    pub fn new(model: LinearGaussianModel, observations: Vec<DVector<f64>>) -> Result<Self> {
        let dx = model.dim_x();
        if dx > MAX_HOT_DIM || model.dim_y() > MAX_HOT_DIM {
            return Err(SmcError::UnsupportedDimension(dx.max(model.dim_y())));
        }
        if observations.is_empty() {
            return Err(SmcError::DimensionMismatch("no observations".into()));
        }
        let two_pi_ln = (2.0 * std::f64::consts::PI).ln();

        let chol_cx = model
            .cx
            .clone()
            .cholesky()
            .ok_or(SmcError::NotPositiveDefinite("C_X"))?;
        let cx_inv = chol_cx.inverse();
        let log_det_cx: f64 = chol_cx.l().diagonal().iter().map(|d| d.ln()).sum::<f64>() * 2.0;
        let log_m_const = -0.5 * dx as f64 * two_pi_ln - 0.5 * log_det_cx;

        let chol_cy = model
            .cy
            .clone()
            .cholesky()
            .ok_or(SmcError::NotPositiveDefinite("C_Y"))?;
        let cy_inv = chol_cy.inverse();
        let log_det_cy: f64 = chol_cy.l().diagonal().iter().map(|d| d.ln()).sum::<f64>() * 2.0;
        let log_g_const = -0.5 * model.dim_y() as f64 * two_pi_ln - 0.5 * log_det_cy;

        // Optimal one-step proposal: precision C_X^{-1} + F_Y^T C_Y^{-1} F_Y.
        let precision = &cx_inv + model.fy.transpose() * &cy_inv * &model.fy;
        let prop_cov = precision
            .clone()
            .cholesky()
            .ok_or(SmcError::NotPositiveDefinite("proposal precision"))?
            .inverse();
        let prop_chol_fact = prop_cov
            .clone()
            .cholesky()
            .ok_or(SmcError::NotPositiveDefinite("proposal covariance"))?;
        let log_det_prop: f64 = prop_chol_fact
            .l()
            .diagonal()
            .iter()
            .map(|d| d.ln())
            .sum::<f64>()
            * 2.0;
        let log_q_const = -0.5 * dx as f64 * two_pi_ln - 0.5 * log_det_prop;
        let prop_from_prev = &prop_cov * &cx_inv * &model.fx;
        let obs_gain = &prop_cov * model.fy.transpose() * &cy_inv;
        let prop_from_obs = observations.iter().map(|y| &obs_gain * y).collect();

        let l0 = model
            .sigma0
            .clone()
            .cholesky()
            .ok_or(SmcError::NotPositiveDefinite("Sigma_0"))?
            .l();

        Ok(Self {
            l0,
            lx: chol_cx.l(),
            fx: FlatMatrix::from(&model.fx),
            cx_inv: FlatMatrix::from(&cx_inv),
            log_m_const,
            fy: FlatMatrix::from(&model.fy),
            cy_inv: FlatMatrix::from(&cy_inv),
            log_g_const,
            prop_chol: prop_chol_fact.l(),
            prop_from_prev: FlatMatrix::from(&prop_from_prev),
            prop_from_obs,
            prop_prec: FlatMatrix::from(&precision),
            log_q_const,
            model,
            observations,
        })
    }

    pub fn model(&self) -> &LinearGaussianModel {
        &self.model
    }

    pub fn observations(&self) -> &[DVector<f64>] {
        &self.observations
    }

    /// Exact Kalman recursions for this model and observation record.
    pub fn kalman(&self) -> Result<KalmanResult> {
        kalman_filter_smoother(&self.model, &self.observations)
    }

    /// Transition as a Gaussian object (for coupling tests).
    pub fn transition_gaussian(&self, prev: &DVector<f64>) -> MvGaussian {
        MvGaussian::new(&self.model.fx * prev, self.lx.clone())
            .expect("C_X factor is invertible")
    }

    /// Mean of the guided proposal given the previous state at time `t`.
    pub fn guided_mean(&self, t: usize, prev: &DVector<f64>) -> DVector<f64> {
        let dx = self.model.dim_x();
        let mut mean = DVector::zeros(dx);
        self.prop_from_prev.matvec(prev.as_slice(), mean.as_mut_slice());
        mean += &self.prop_from_obs[t];
        mean
    }

    /// Covariance of the guided proposal (time invariant).
    pub fn guided_cov(&self) -> DMatrix<f64> {
        &self.prop_chol * self.prop_chol.transpose()
    }
}

impl FeynmanKacModel for LgFeynmanKac {
    type State = DVector<f64>;

    fn horizon(&self) -> usize {
        self.observations.len() - 1
    }

    fn sample_initial(&self, rng: &mut dyn Rng) -> DVector<f64> {
        &self.model.mu0 + &self.l0 * std_normal_vector(self.model.dim_x(), rng)
    }

    fn sample_transition(&self, _t: usize, prev: &DVector<f64>, rng: &mut dyn Rng) -> DVector<f64> {
        &self.model.fx * prev + &self.lx * std_normal_vector(self.model.dim_x(), rng)
    }

    fn log_potential(&self, t: usize, x: &DVector<f64>) -> f64 {
        let dy = self.model.dim_y();
        let mut r = [0.0f64; MAX_HOT_DIM];
        self.fy.matvec(x.as_slice(), &mut r[..dy]);
        let y = self.observations[t].as_slice();
        for i in 0..dy {
            r[i] = y[i] - r[i];
        }
        self.log_g_const - 0.5 * self.cy_inv.quadform(&r[..dy])
    }

    fn log_transition_density(
        &self,
        _t: usize,
        prev: &DVector<f64>,
        next: &DVector<f64>,
    ) -> Option<f64> {
        let dx = self.model.dim_x();
        let mut r = [0.0f64; MAX_HOT_DIM];
        self.fx.matvec(prev.as_slice(), &mut r[..dx]);
        let y = next.as_slice();
        for i in 0..dx {
            r[i] = y[i] - r[i];
        }
        Some(self.log_m_const - 0.5 * self.cx_inv.quadform(&r[..dx]))
    }

    fn log_transition_bound(&self, _t: usize) -> Option<f64> {
        // The density peaks at the transition mean.
        Some(self.log_m_const)
    }

    fn sample_guided(
        &self,
        t: usize,
        prev: &DVector<f64>,
        rng: &mut dyn Rng,
    ) -> Option<DVector<f64>> {
        let mean = self.guided_mean(t, prev);
        Some(mean + &self.prop_chol * std_normal_vector(self.model.dim_x(), rng))
    }

    fn log_guided_density(
        &self,
        t: usize,
        prev: &DVector<f64>,
        next: &DVector<f64>,
    ) -> Option<f64> {
        let dx = self.model.dim_x();
        let mean = self.guided_mean(t, prev);
        let mut r = [0.0f64; MAX_HOT_DIM];
        for i in 0..dx {
            r[i] = next[i] - mean[i];
        }
        Some(self.log_q_const - 0.5 * self.prop_prec.quadform(&r[..dx]))
    }

    fn sample_coupled_transition(
        &self,
        _t: usize,
        prev_a: &DVector<f64>,
        prev_b: &DVector<f64>,
        rng: &mut dyn Rng,
    ) -> Option<(DVector<f64>, DVector<f64>)> {
        let a = self.transition_gaussian(prev_a);
        let b = self.transition_gaussian(prev_b);
        let pair = rejection_maximal_coupling(&a, &b, rng);
        Some((pair.left, pair.right))
    }
}
