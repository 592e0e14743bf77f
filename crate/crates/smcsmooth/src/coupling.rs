//! Couplings of Gaussian distributions and of Euler-discretised diffusions.
//!
//! A coupler draws a pair of random vectors with prescribed marginals while
//! correlating them so that exact meetings (`left == right`, bitwise) happen
//! as often as possible. Meetings always hand back the same vector on both
//! sides, so downstream equality checks are reliable.

use nalgebra::{DMatrix, DVector};
use rand::RngExt as _;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, SmcError};

/// A coupled draw. `met == true` implies the two states are bitwise equal.
#[derive(Debug, Clone)]
pub struct CoupledPair {
    pub left: DVector<f64>,
    pub right: DVector<f64>,
    pub met: bool,
}

impl CoupledPair {
    fn new(left: DVector<f64>, right: DVector<f64>) -> Self {
        let met = left == right;
        Self { left, right, met }
    }
}

/// Anything with an evaluable density and an exact sampler.
pub trait SampleDensity {
    fn sample(&self, rng: &mut dyn Rng) -> DVector<f64>;
    fn density(&self, x: &DVector<f64>) -> f64;
}

/// A multivariate Gaussian `N(mean, scale * scale^T)` parameterised by an
/// invertible scale matrix.
#[derive(Debug, Clone)]
pub struct MvGaussian {
    mean: DVector<f64>,
    scale: DMatrix<f64>,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    log_norm: f64,
}

impl MvGaussian {
    pub fn new(mean: DVector<f64>, scale: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if scale.nrows() != d || scale.ncols() != d {
            return Err(SmcError::DimensionMismatch("scale matrix shape".into()));
        }
        let lu = scale.clone().lu();
        let det = lu.determinant();
        if det == 0.0 || !det.is_finite() {
            return Err(SmcError::NotPositiveDefinite("gaussian scale matrix"));
        }
        let log_norm = -0.5 * d as f64 * (2.0 * std::f64::consts::PI).ln() - det.abs().ln();
        Ok(Self {
            mean,
            scale,
            lu,
            log_norm,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn scale(&self) -> &DMatrix<f64> {
        &self.scale
    }

    /// `scale^{-1} v`.
    fn solve_scale(&self, v: &DVector<f64>) -> Option<DVector<f64>> {
        self.lu.solve(v)
    }

    pub fn log_density(&self, x: &DVector<f64>) -> f64 {
        let z = self
            .solve_scale(&(x - &self.mean))
            .expect("scale verified invertible at construction");
        self.log_norm - 0.5 * z.norm_squared()
    }
}

impl SampleDensity for MvGaussian {
    fn sample(&self, rng: &mut dyn Rng) -> DVector<f64> {
        &self.mean + &self.scale * std_normal_vector(self.dim(), rng)
    }

    fn density(&self, x: &DVector<f64>) -> f64 {
        self.log_density(x).exp()
    }
}

/// A vector of independent standard normals.
pub fn std_normal_vector(dim: usize, rng: &mut dyn Rng) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| rng.sample(StandardNormal))
}

/// Reflection coupling of two Gaussians: the shared noise of the second
/// draw is reflected across the hyperplane normal to
/// `scale_b^{-1}(mean_a - mean_b)`. Marginals are exact; two distinct
/// continuous distributions never meet under this coupler.
///
/// When the means are equal the reflection direction is undefined and the
/// coupler falls back to common noise (the limiting optimal coupling).
pub fn lindvall_rogers(a: &MvGaussian, b: &MvGaussian, rng: &mut dyn Rng) -> CoupledPair {
    let w_a = std_normal_vector(a.dim(), rng);
    let w_b = reflect_noise(a, b, &w_a);
    CoupledPair::new(&a.mean + &a.scale * &w_a, &b.mean + &b.scale * w_b)
}

fn reflect_noise(a: &MvGaussian, b: &MvGaussian, w_a: &DVector<f64>) -> DVector<f64> {
    if a.mean == b.mean {
        return w_a.clone();
    }
    let u = b
        .solve_scale(&(&a.mean - &b.mean))
        .expect("scale verified invertible at construction");
    let norm = u.norm();
    if norm == 0.0 || !norm.is_finite() {
        return w_a.clone();
    }
    let u = u / norm;
    w_a - 2.0 * u.dot(w_a) * &u
}

/// Rejection maximal coupler: meets with probability exactly
/// `1 - TV(f_a, f_b)`, at the price of an unbounded rejection loop on the
/// non-meeting branch.
pub fn rejection_maximal_coupling<A: SampleDensity, B: SampleDensity>(
    f_a: &A,
    f_b: &B,
    rng: &mut dyn Rng,
) -> CoupledPair {
    let x_a = f_a.sample(rng);
    let u_a = rng.random::<f64>() * f_a.density(&x_a);
    if u_a <= f_b.density(&x_a) {
        let x_b = x_a.clone();
        return CoupledPair {
            left: x_a,
            right: x_b,
            met: true,
        };
    }
    loop {
        let x_b = f_b.sample(rng);
        let u_b = rng.random::<f64>() * f_b.density(&x_b);
        if u_b > f_a.density(&x_b) {
            return CoupledPair {
                left: x_a,
                right: x_b,
                met: false,
            };
        }
    }
}

/// Modified reflection coupler: a reflection draw, then both sides are
/// replaced by a shared preliminary draw whenever they land under the
/// overlap of the two densities. Marginals are exact, meetings happen with
/// positive probability whenever the densities overlap, and the per-call
/// cost is deterministic (two Gaussian simulations and one auxiliary draw).
pub fn mlr_coupler(a: &MvGaussian, b: &MvGaussian, rng: &mut dyn Rng) -> CoupledPair {
    let reflected = lindvall_rogers(a, b, rng);
    let (mut x_a, mut x_b) = (reflected.left, reflected.right);
    let u = rng.random::<f64>();
    let u_a = u * a.density(&x_a);
    let u_b = u * b.density(&x_b);
    let y = a.sample(rng);
    let v = rng.random::<f64>() * a.density(&y);
    if v <= b.density(&y) {
        if u_a <= b.density(&x_a) {
            x_a = y.clone();
        }
        if u_b <= a.density(&x_b) {
            x_b = y;
        }
    }
    CoupledPair::new(x_a, x_b)
}

/// The per-step Gaussian coupler used inside Euler chains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GaussianCoupler {
    /// Reflection only; never meets on a fixed grid.
    LindvallRogers,
    /// Reflection plus overlap replacement.
    Mlr,
    /// Identical noise on both sides; meets only from equal inputs.
    CommonNoise,
}

/// Apply the selected coupler.
pub fn couple_gaussians(
    kind: GaussianCoupler,
    a: &MvGaussian,
    b: &MvGaussian,
    rng: &mut dyn Rng,
) -> CoupledPair {
    match kind {
        GaussianCoupler::LindvallRogers => lindvall_rogers(a, b, rng),
        GaussianCoupler::Mlr => mlr_coupler(a, b, rng),
        GaussianCoupler::CommonNoise => {
            let w = std_normal_vector(a.dim(), rng);
            CoupledPair::new(&a.mean + &a.scale * &w, &b.mean + &b.scale * &w)
        }
    }
}

/// Gaussian parameters of one Euler substep from `x` with step `delta`.
pub fn euler_step_params(
    drift: &dyn Fn(&DVector<f64>) -> DVector<f64>,
    diffusion: &dyn Fn(&DVector<f64>) -> DMatrix<f64>,
    x: &DVector<f64>,
    delta: f64,
) -> Result<MvGaussian> {
    let mean = x + delta * drift(x);
    let scale = delta.sqrt() * diffusion(x);
    if mean.iter().any(|v| !v.is_finite()) || scale.iter().any(|v| !v.is_finite()) {
        return Err(SmcError::NonFinite {
            context: "euler drift or diffusion".into(),
        });
    }
    MvGaussian::new(mean, scale)
}

/// Coupling of two Euler discretisations over unit time with `n_steps`
/// substeps. Each substep couples the two one-step Gaussians; once the
/// chains are bitwise equal they advance with shared noise and stay equal.
pub fn coupled_euler_transition(
    drift: &dyn Fn(&DVector<f64>) -> DVector<f64>,
    diffusion: &dyn Fn(&DVector<f64>) -> DMatrix<f64>,
    x0a: &DVector<f64>,
    x0b: &DVector<f64>,
    n_steps: usize,
    coupler: GaussianCoupler,
    rng: &mut dyn Rng,
) -> Result<CoupledPair> {
    assert!(n_steps >= 1, "need at least one euler substep");
    let delta = 1.0 / n_steps as f64;
    let mut x_a = x0a.clone();
    let mut x_b = x0b.clone();
    for step in 0..n_steps {
        let with_context = |e| match e {
            SmcError::NonFinite { context } => SmcError::NonFinite {
                context: format!("{context} (substep {step})"),
            },
            other => other,
        };
        if x_a == x_b {
            let params = euler_step_params(drift, diffusion, &x_a, delta).map_err(with_context)?;
            x_a = params.sample(rng);
            x_b = x_a.clone();
        } else {
            let pa = euler_step_params(drift, diffusion, &x_a, delta).map_err(with_context)?;
            let pb = euler_step_params(drift, diffusion, &x_b, delta).map_err(with_context)?;
            let pair = couple_gaussians(coupler, &pa, &pb, rng);
            x_a = pair.left;
            x_b = pair.right;
        }
    }
    Ok(CoupledPair::new(x_a, x_b))
}
