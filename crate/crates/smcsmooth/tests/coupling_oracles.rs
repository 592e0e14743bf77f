//! Coupler correctness: exact marginals (KS tests), the maximal-coupling
//! identity against a quadrature oracle, the coupling inequality, and the
//! deterministic-cost contrast between the modified reflection coupler and
//! the rejection maximal coupler.

mod common;

use common::{ks_critical, ks_statistic, normal_cdf, tv_distance_1d};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use smcsmooth::coupling::{
    couple_gaussians, lindvall_rogers, mlr_coupler, rejection_maximal_coupling, GaussianCoupler,
    MvGaussian, SampleDensity,
};
use smcsmooth::rng::stream_rng;

fn gauss1(mean: f64, sd: f64) -> MvGaussian {
    MvGaussian::new(DVector::from_vec(vec![mean]), DMatrix::from_vec(1, 1, vec![sd])).unwrap()
}

fn gauss2(mean: [f64; 2], cov: [[f64; 2]; 2]) -> MvGaussian {
    let cov = DMatrix::from_vec(2, 2, vec![cov[0][0], cov[1][0], cov[0][1], cov[1][1]]);
    let scale = cov.cholesky().unwrap().l();
    MvGaussian::new(DVector::from_vec(mean.to_vec()), scale).unwrap()
}

/// The population-model environmental noise covariance.
fn lv_noise() -> [[f64; 2]; 2] {
    [[0.01, 0.005], [0.005, 0.01]]
}

fn marginal_sd(cov: [[f64; 2]; 2], i: usize) -> f64 {
    cov[i][i].sqrt()
}

#[test]
fn coupler_marginals_pass_ks_in_two_dimensions() {
    let cov = lv_noise();
    let a = gauss2([0.08, 0.0], cov);
    let b = gauss2([0.0, 0.06], cov);
    let draws = 100_000;
    let critical = ks_critical(draws, 0.001);

    for (name, kind) in [
        ("reflection", GaussianCoupler::LindvallRogers),
        ("modified reflection", GaussianCoupler::Mlr),
        ("common noise", GaussianCoupler::CommonNoise),
    ] {
        let mut rng = stream_rng(500, 1);
        let mut left = vec![Vec::with_capacity(draws), Vec::with_capacity(draws)];
        let mut right = vec![Vec::with_capacity(draws), Vec::with_capacity(draws)];
        for _ in 0..draws {
            let pair = couple_gaussians(kind, &a, &b, &mut rng);
            for i in 0..2 {
                left[i].push(pair.left[i]);
                right[i].push(pair.right[i]);
            }
        }
        for i in 0..2 {
            let d_left = ks_statistic(&mut left[i], |x| {
                normal_cdf(x, if i == 0 { 0.08 } else { 0.0 }, marginal_sd(cov, i))
            });
            let d_right = ks_statistic(&mut right[i], |x| {
                normal_cdf(x, if i == 0 { 0.0 } else { 0.06 }, marginal_sd(cov, i))
            });
            assert!(d_left < critical, "{name}: left coord {i} KS {d_left} >= {critical}");
            assert!(d_right < critical, "{name}: right coord {i} KS {d_right} >= {critical}");
        }
    }
}

#[test]
fn maximal_coupler_marginals_pass_ks_in_one_dimension() {
    let a = gauss1(0.0, 1.0);
    let b = gauss1(1.5, 1.0);
    let draws = 100_000;
    let mut rng = stream_rng(500, 2);
    let mut left = Vec::with_capacity(draws);
    let mut right = Vec::with_capacity(draws);
    for _ in 0..draws {
        let pair = rejection_maximal_coupling(&a, &b, &mut rng);
        left.push(pair.left[0]);
        right.push(pair.right[0]);
    }
    let critical = ks_critical(draws, 0.001);
    let d_left = ks_statistic(&mut left, |x| normal_cdf(x, 0.0, 1.0));
    let d_right = ks_statistic(&mut right, |x| normal_cdf(x, 1.5, 1.0));
    assert!(d_left < critical, "left KS {d_left}");
    assert!(d_right < critical, "right KS {d_right}");
}

#[test]
fn maximal_meeting_frequency_equals_overlap_integral() {
    // Quadrature oracle: overlap of N(0,1) and N(1.5,1) is 0.4533...
    let overlap = 1.0
        - tv_distance_1d(
            |x| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt(),
            |x| (-0.5 * (x - 1.5) * (x - 1.5)).exp() / (2.0 * std::f64::consts::PI).sqrt(),
            -12.0,
            13.5,
            1e-10,
        );
    assert!(
        (overlap - 0.4533).abs() < 1e-4,
        "quadrature overlap {overlap} should round to 0.4533"
    );

    let a = gauss1(0.0, 1.0);
    let b = gauss1(1.5, 1.0);
    let mut rng = stream_rng(500, 3);
    let trials = 100_000;
    let meetings = (0..trials)
        .filter(|_| rejection_maximal_coupling(&a, &b, &mut rng).met)
        .count();
    let freq = meetings as f64 / trials as f64;
    assert!(
        (freq - overlap).abs() < 0.005,
        "meeting frequency {freq} vs overlap {overlap}"
    );
}

#[test]
fn no_coupler_beats_the_coupling_inequality() {
    // Meeting probability of any coupler is at most 1 - TV plus noise.
    let sd_a = 1.0;
    let sd_b = 1.3;
    let (mu_a, mu_b) = (0.0, 0.9);
    let overlap = 1.0
        - tv_distance_1d(
            |x| (-0.5 * (x - mu_a) * (x - mu_a) / (sd_a * sd_a)).exp()
                / ((2.0 * std::f64::consts::PI).sqrt() * sd_a),
            |x| (-0.5 * (x - mu_b) * (x - mu_b) / (sd_b * sd_b)).exp()
                / ((2.0 * std::f64::consts::PI).sqrt() * sd_b),
            -15.0,
            15.0,
            1e-10,
        );
    let a = gauss1(mu_a, sd_a);
    let b = gauss1(mu_b, sd_b);
    let trials = 100_000;
    let se = (overlap * (1.0 - overlap) / trials as f64).sqrt();
    for kind in [
        GaussianCoupler::LindvallRogers,
        GaussianCoupler::Mlr,
        GaussianCoupler::CommonNoise,
    ] {
        let mut rng = stream_rng(500, 4);
        let meetings = (0..trials)
            .filter(|_| couple_gaussians(kind, &a, &b, &mut rng).met)
            .count();
        let freq = meetings as f64 / trials as f64;
        assert!(
            freq <= overlap + 4.0 * se,
            "{kind:?} met {freq}, overlap bound {overlap}"
        );
    }
    // And the rejection coupler attains it.
    let mut rng = stream_rng(500, 5);
    let meetings = (0..trials)
        .filter(|_| rejection_maximal_coupling(&a, &b, &mut rng).met)
        .count();
    let freq = meetings as f64 / trials as f64;
    assert!((freq - overlap).abs() < 4.0 * se, "maximal coupler {freq} vs {overlap}");
}

#[test]
fn mlr_meets_often_on_identical_distributions() {
    let cov = lv_noise();
    let a = gauss2([0.0, 0.0], cov);
    let b = gauss2([0.0, 0.0], cov);
    let mut rng = stream_rng(500, 6);
    let trials = 100_000;
    let meetings = (0..trials)
        .filter(|_| mlr_coupler(&a, &b, &mut rng).met)
        .count();
    let freq = meetings as f64 / trials as f64;
    assert!(freq > 0.4, "identical-distribution meeting frequency {freq}");
}

/// Generator wrapper counting how many random words a coupler consumes.
struct CountingRng<'a> {
    inner: &'a mut smcsmooth::rng::Rng,
    words: u64,
}

impl rand::TryRng for CountingRng<'_> {
    type Error = std::convert::Infallible;

    fn try_next_u32(&mut self) -> Result<u32, Self::Error> {
        self.words += 1;
        Ok(self.inner.next_u32())
    }
    fn try_next_u64(&mut self) -> Result<u64, Self::Error> {
        self.words += 1;
        Ok(self.inner.next_u64())
    }
    fn try_fill_bytes(&mut self, dst: &mut [u8]) -> Result<(), Self::Error> {
        self.words += 1;
        self.inner.fill_bytes(dst);
        Ok(())
    }
}

/// `SampleDensity` wrapper counting density evaluations.
struct CountingDensity<'a> {
    inner: &'a MvGaussian,
    calls: std::cell::Cell<u64>,
}

impl SampleDensity for CountingDensity<'_> {
    fn sample(&self, rng: &mut dyn Rng) -> DVector<f64> {
        self.inner.sample(rng)
    }
    fn density(&self, x: &DVector<f64>) -> f64 {
        self.calls.set(self.calls.get() + 1);
        self.inner.density(x)
    }
}

#[test]
fn mlr_cost_is_bounded_while_rejection_cost_is_not() {
    // Almost identical inputs: the rejection maximal coupler's no-meet
    // branch loops for about 1/TV iterations, so its per-call cost exceeds
    // any fixed bound; the modified reflection coupler has no loop at all.
    let a = gauss1(0.0, 1.0);
    let b = gauss1(0.05, 1.0);
    let mut rng = stream_rng(500, 7);

    let mut max_rejection_calls = 0u64;
    for _ in 0..100_000 {
        let wrapped_a = CountingDensity {
            inner: &a,
            calls: std::cell::Cell::new(0),
        };
        let wrapped_b = CountingDensity {
            inner: &b,
            calls: std::cell::Cell::new(0),
        };
        rejection_maximal_coupling(&wrapped_a, &wrapped_b, &mut rng);
        max_rejection_calls =
            max_rejection_calls.max(wrapped_a.calls.get() + wrapped_b.calls.get());
    }
    assert!(
        max_rejection_calls > 100,
        "rejection coupler stayed below the bound: {max_rejection_calls}"
    );

    // The reflection-with-replacement coupler consumes a small bounded
    // number of random words per call (the only variation left is the
    // ziggurat layer of the normal sampler), in contrast to the unbounded
    // loop above on identical inputs.
    let mut max_mlr_words = 0u64;
    for _ in 0..100_000 {
        let mut counting = CountingRng {
            inner: &mut rng,
            words: 0,
        };
        mlr_coupler(&a, &b, &mut counting);
        max_mlr_words = max_mlr_words.max(counting.words);
    }
    assert!(
        max_mlr_words <= 24,
        "reflection coupler cost should be bounded, saw {max_mlr_words} words"
    );
    assert!(max_rejection_calls > 4 * max_mlr_words);
}

#[test]
fn lindvall_rogers_matches_reflection_identity_in_2d() {
    // W_b = (I - 2uu^T) W_a with u along scale_b^{-1}(mu_a - mu_b): check
    // through the returned points.
    let cov = lv_noise();
    let a = gauss2([0.3, -0.1], cov);
    let b = gauss2([-0.2, 0.4], cov);
    let scale = DMatrix::from_vec(2, 2, vec![0.1, 0.05, 0.0, 0.05 * 3.0f64.sqrt()]);
    let _ = scale;
    let mut rng = stream_rng(500, 8);
    for _ in 0..200 {
        let pair = lindvall_rogers(&a, &b, &mut rng);
        // Reconstruct the noises and verify the reflection is an isometry
        // that fixes the orthogonal complement of u.
        let w_a = a.scale().clone().lu().solve(&(&pair.left - a.mean())).unwrap();
        let w_b = b.scale().clone().lu().solve(&(&pair.right - b.mean())).unwrap();
        assert!((w_a.norm() - w_b.norm()).abs() < 1e-10, "reflection preserves norms");
        let u = b.scale().clone().lu().solve(&(a.mean() - b.mean())).unwrap();
        let u = &u / u.norm();
        assert!(
            (u.dot(&w_b) + u.dot(&w_a)).abs() < 1e-10,
            "component along u flips sign"
        );
    }
}

#[test]
fn brownian_meeting_times_follow_the_reflection_law() {
    // Coupled Euler chains of a standard Brownian pair started at 0 and
    // 1.5. As the step shrinks, the law of the meeting time restricted to
    // [0, 5] approaches the reflection-coupling reference law
    // Levy(0, (b-a)^2 / 4); here we check the two-step-size stability that
    // the full-scale criterion asserts, at a lighter sample size.
    let meeting_times = |delta: f64, paths: usize, stream: u64| -> Vec<f64> {
        let mut rng = stream_rng(500, stream);
        let steps = (5.0 / delta).round() as usize;
        let drift = |_: &DVector<f64>| DVector::from_vec(vec![0.0]);
        let diffusion = |_: &DVector<f64>| DMatrix::from_vec(1, 1, vec![1.0]);
        let mut times = Vec::new();
        for _ in 0..paths {
            let mut xa = DVector::from_vec(vec![0.0]);
            let mut xb = DVector::from_vec(vec![1.5]);
            for step in 1..=steps {
                let pa = smcsmooth::coupling::euler_step_params(&drift, &diffusion, &xa, delta)
                    .unwrap();
                let pb = smcsmooth::coupling::euler_step_params(&drift, &diffusion, &xb, delta)
                    .unwrap();
                let pair = couple_gaussians(GaussianCoupler::Mlr, &pa, &pb, &mut rng);
                xa = pair.left;
                xb = pair.right;
                if pair.met {
                    times.push(step as f64 * delta);
                    break;
                }
            }
        }
        times
    };

    let mut coarse = meeting_times(0.02, 4000, 9);
    let mut fine = meeting_times(0.01, 4000, 10);
    let d = common::ks_two_sample(&mut coarse, &mut fine);
    assert!(d < 0.08, "meeting-time laws drift apart: KS {d}");

    // Against the reflection-coupling reference law, restricted to [0, 5].
    let levy_scale = (1.5f64 / 2.0).powi(2);
    let levy_cdf = |t: f64| statrs::function::erf::erfc((levy_scale / (2.0 * t)).sqrt());
    let total_mass = levy_cdf(5.0);
    let d_ref = ks_statistic(&mut fine, |t| levy_cdf(t) / total_mass);
    assert!(d_ref < 0.1, "restricted reference-law distance {d_ref}");
}
