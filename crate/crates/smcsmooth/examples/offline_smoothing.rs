//! Offline trajectory sampling: draw smoothed paths through backward
//! kernels and watch genealogy tracking degenerate while backward sampling
//! keeps the paths diverse.

use smcsmooth::backward::{gt_kernel, BackwardSamplerKind, FfbsSamplingKernel};
use smcsmooth::cost::CostCounter;
use smcsmooth::fk::{run_filter, FilterKind};
use smcsmooth::models::{LgFeynmanKac, LinearGaussianModel};
use smcsmooth::resample::ResamplingScheme;
use smcsmooth::rng::stream_rng;
use smcsmooth::smoother::{fixed_marginal_estimate, offline_smoother, unique_index_count};

fn main() {
    let horizon = 400;
    let n = 100;
    let model = LinearGaussianModel::scalar(0.5);
    let mut rng = stream_rng(3, 0);
    let (_, obs) = model.simulate_data(horizon, &mut rng);
    let fk = LgFeynmanKac::new(model, obs).unwrap();
    let kalman = fk.kalman().unwrap();

    let clouds = run_filter(&fk, n, FilterKind::Bootstrap, ResamplingScheme::Systematic, &mut rng)
        .unwrap();
    let counter = CostCounter::new();

    // Genealogy tracking: walking the stored ancestors.
    let gt_kernels: Vec<_> = (1..=horizon).map(|t| gt_kernel(&clouds[t]).unwrap()).collect();
    let gt_paths = offline_smoother(&clouds, &gt_kernels, n, &mut rng).unwrap();

    // Backward sampling from the smoothing rows via hybrid rejection.
    let bs_kernels: Vec<_> = (1..=horizon)
        .map(|t| {
            FfbsSamplingKernel::new(
                &fk,
                &clouds[t - 1],
                &clouds[t],
                BackwardSamplerKind::Hybrid { k: None },
                &counter,
            )
            .unwrap()
        })
        .collect();
    let bs_paths = offline_smoother(&clouds, &bs_kernels, n, &mut rng).unwrap();

    println!("distinct indices used per time (out of {n} trajectories):");
    println!("{:>6} {:>10} {:>10}", "t", "genealogy", "backward");
    for s in [0, horizon / 4, horizon / 2, 3 * horizon / 4, horizon] {
        println!(
            "{s:>6} {:>10} {:>10}",
            unique_index_count(&gt_paths, s),
            unique_index_count(&bs_paths, s)
        );
    }

    let s = horizon / 2;
    println!(
        "\nfixed-marginal estimate at t = {s}: genealogy {:.4}, backward {:.4}, exact {:.4}",
        fixed_marginal_estimate(&gt_paths, s, |x| x[0]),
        fixed_marginal_estimate(&bs_paths, s, |x| x[0]),
        kalman.smoothing[s].mean[0]
    );
    println!(
        "backward sampling used {:.1} density evaluations per trajectory-step",
        counter.evals() as f64 / (n * horizon) as f64
    );
}
