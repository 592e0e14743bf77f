//! Drive the experiment harness from code: run a replicated experiment,
//! write the results file, and post-process it into the summary and tail
//! reports. The `smcsmooth` binary exposes the same pipeline as CLI
//! subcommands.

use smcsmooth::bench::io::read_results;
use smcsmooth::bench::{run_experiment_to_file, summarize, tail_report, ExperimentConfig};

fn main() {
    let config = ExperimentConfig::from_toml(
        r#"
        [model]
        family = "lg-benchmark"
        dim = 2
        alpha = 0.4
        sigma_y2 = 0.5

        [run]
        algorithm = "BM"
        n_particles = 200
        horizon = 300
        n_tilde = 2
        replicates = 30
        "#,
    )
    .unwrap();

    let dir = std::env::temp_dir().join("smcsmooth_example");
    std::fs::create_dir_all(&dir).unwrap();
    let results = dir.join("bm.csv");
    run_experiment_to_file(&config, 2024, 1, &results).unwrap();
    println!("results written to {}", results.display());

    let (meta, records) = read_results(&results).unwrap();
    let summary = summarize(&records, &meta, None).unwrap();
    println!(
        "algorithm {} with N = {}: {} replicates, cost/(NT) = {} (one MH step per particle-step)",
        summary.algorithm, summary.n_particles, summary.replicates_used, summary.mean_cost_per_nt
    );
    println!(
        "squared-IQR log-log slope over t in [{}, {}]: {:.2}",
        summary.slope.from_t,
        summary.slope.to_t,
        summary.slope.slope.unwrap()
    );
    println!(
        "final estimate: median {:.3} with bootstrap standard error {:.3}",
        summary.final_estimate.median, summary.final_estimate.bootstrap_se
    );

    let tails = tail_report(&records, &meta, 1).unwrap();
    println!(
        "tail report at t = 1: median mean-trials-per-particle {:.2}, max/median {:.2}",
        tails.median, tails.max_over_median
    );
}
