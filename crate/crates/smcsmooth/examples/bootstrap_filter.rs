//! Run bootstrap and guided particle filters on a linear Gaussian model
//! and compare filtering means, effective sample sizes and the likelihood
//! estimate against the exact Kalman recursions.

use smcsmooth::fk::{log_likelihood, run_filter, FilterKind};
use smcsmooth::models::{LgFeynmanKac, LinearGaussianModel};
use smcsmooth::resample::ResamplingScheme;
use smcsmooth::rng::stream_rng;

fn main() {
    let horizon = 30;
    let n_particles = 2000;
    let model = LinearGaussianModel::benchmark(2, 0.4, 0.5);
    let mut rng = stream_rng(1, 0);
    let (_, observations) = model.simulate_data(horizon, &mut rng);
    let fk = LgFeynmanKac::new(model, observations).unwrap();
    let kalman = fk.kalman().unwrap();

    for (kind, name) in [
        (FilterKind::Bootstrap, "bootstrap"),
        (FilterKind::Guided, "guided"),
    ] {
        let clouds = run_filter(&fk, n_particles, kind, ResamplingScheme::Systematic, &mut rng)
            .unwrap();
        let mean_ess: f64 =
            clouds.iter().map(|c| c.ess()).sum::<f64>() / clouds.len() as f64 / n_particles as f64;
        let max_err = clouds
            .iter()
            .enumerate()
            .map(|(t, c)| (c.weighted_mean(|x| x[0]) - kalman.filtering[t].mean[0]).abs())
            .fold(0.0f64, f64::max);
        println!(
            "{name:9} filter: mean ESS/N = {mean_ess:.2}, \
             max |filter mean - Kalman| = {max_err:.4}, \
             log-likelihood = {:.4} (exact {:.4})",
            log_likelihood(&clouds),
            kalman.log_likelihood
        );
    }
}
