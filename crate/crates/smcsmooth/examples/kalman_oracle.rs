//! The exact linear-Gaussian oracle: forward filter, backward smoother and
//! the prediction-error log likelihood, with the covariance ordering that
//! conditioning guarantees.

use smcsmooth::models::{kalman_filter_smoother, LinearGaussianModel};
use smcsmooth::rng::stream_rng;

fn main() {
    let horizon = 12;
    let model = LinearGaussianModel::benchmark(2, 0.4, 0.5);
    let mut rng = stream_rng(8, 0);
    let (states, obs) = model.simulate_data(horizon, &mut rng);
    let result = kalman_filter_smoother(&model, &obs).unwrap();
    result.validate_ordering().unwrap();

    println!("log likelihood: {:.4}", result.log_likelihood);
    println!(
        "{:>3} {:>8} {:>8} {:>8} {:>8}  {:>8} {:>8}",
        "t", "truth", "pred", "filt", "smth", "var filt", "var smth"
    );
    for t in 0..=horizon {
        println!(
            "{t:>3} {:>8.3} {:>8.3} {:>8.3} {:>8.3}  {:>8.4} {:>8.4}",
            states[t][0],
            result.predictive[t].mean[0],
            result.filtering[t].mean[0],
            result.smoothing[t].mean[0],
            result.filtering[t].cov[(0, 0)],
            result.smoothing[t].cov[(0, 0)],
        );
    }
    println!("\nsmoothing variances never exceed filtering variances,");
    println!("which never exceed predictive variances (checked exactly).");
    println!(
        "additive target sum of first-coordinate smoothing means: {:.4}",
        result.additive_target(0)
    );
}
