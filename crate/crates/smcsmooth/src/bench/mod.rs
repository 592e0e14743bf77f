//! Experiment harness: configuration, replicated runs, result files and
//! summary reports.

pub mod io;
pub mod stats;

use std::fmt;
use std::path::Path;
use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::backward::{
    gt_kernel, imhp_kernel, itr_forward_step, itrc_forward_step, paris_kernel,
    sample_ffbs_hybrid, BackwardKernel, BackwardSamplerKind, FfbsSamplingKernel, ImhKernel,
    SampleBackward,
};
use crate::cost::{CostCounter, MeetingStats};
use crate::error::{Result, SmcError};
use crate::fk::{filter_step, init_cloud, FeynmanKacModel, FilterKind};
use crate::models::{LgFeynmanKac, LinearGaussianModel, LotkaVolterraSde, LvFeynmanKac};
use crate::numeric::CompensatedSum;
use crate::resample::ResamplingScheme;
use crate::rng::{stream_rng, DATA_STREAM};
use crate::sampler::DiscreteSampler;
use crate::smoother::{
    additive_estimate, online_update, AdditiveFunction, PerStateSum, SmoothingStatVector,
};

/// Environment variable that overrides the seed passed on the command line.
pub const SEED_ENV_VAR: &str = "SMCSMOOTH_SEED";

/// Forward filter / backward kernel combinations, named as in the
/// benchmark: first letter bootstrap or guided, second letter naive
/// genealogy tracking, pure rejection, hybrid rejection or MCMC; plus the
/// two intractable-model smoothers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Algorithm {
    BN,
    BP,
    BH,
    BM,
    GN,
    GP,
    GH,
    GM,
    ITR,
    ITRC,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl std::str::FromStr for Algorithm {
    type Err = SmcError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "BN" => Ok(Self::BN),
            "BP" => Ok(Self::BP),
            "BH" => Ok(Self::BH),
            "BM" => Ok(Self::BM),
            "GN" => Ok(Self::GN),
            "GP" => Ok(Self::GP),
            "GH" => Ok(Self::GH),
            "GM" => Ok(Self::GM),
            "ITR" => Ok(Self::ITR),
            "ITRC" => Ok(Self::ITRC),
            other => Err(SmcError::Config(format!("unknown algorithm {other}"))),
        }
    }
}

impl Algorithm {
    /// Forward filter of the combination (`None` for the coupled forward
    /// passes, which are their own filters).
    pub fn filter(self) -> Option<FilterKind> {
        match self {
            Self::BN | Self::BP | Self::BH | Self::BM => Some(FilterKind::Bootstrap),
            Self::GN | Self::GP | Self::GH | Self::GM => Some(FilterKind::Guided),
            Self::ITR | Self::ITRC => None,
        }
    }

    pub fn needs_transition_density(self) -> bool {
        matches!(
            self,
            Self::BP | Self::BH | Self::BM | Self::GP | Self::GH | Self::GM
        )
    }

    pub fn needs_density_bound(self) -> bool {
        matches!(self, Self::BP | Self::BH | Self::GP | Self::GH)
    }

    pub fn needs_coupled_sampler(self) -> bool {
        matches!(self, Self::ITR | Self::ITRC)
    }
}

/// Execution mode: online additive smoothing or offline trajectory
/// sampling over stored clouds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Online,
    Offline,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Online => write!(f, "online"),
            Mode::Offline => write!(f, "offline"),
        }
    }
}

/// Model section of the experiment configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelConfig {
    /// Linear Gaussian benchmark with `F_X[i,j] = alpha^(1+|i-j|)`.
    LgBenchmark { dim: usize, alpha: f64, sigma_y2: f64 },
    /// Scalar linear Gaussian model (autoregression 0.5, unit state
    /// noise).
    LgScalar { sigma_y: f64 },
    /// Lotka-Volterra SDE with Euler discretisation.
    Lv { n_euler_steps: usize },
}

fn default_n_tilde() -> usize {
    2
}

/// Run section of the experiment configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub n_particles: usize,
    pub horizon: usize,
    #[serde(default = "default_n_tilde")]
    pub n_tilde: usize,
    pub replicates: usize,
    #[serde(default)]
    pub mode: Mode,
}

/// Grid section for the hybrid-growth report.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HybridGrowthConfig {
    pub n_grid: Vec<usize>,
    pub replicates: usize,
    /// The filter runs to this time before trial counts are measured.
    #[serde(default = "default_probe_time")]
    pub probe_time: usize,
}

fn default_probe_time() -> usize {
    10
}

/// Full experiment configuration (TOML on disk).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub run: RunConfig,
    #[serde(default)]
    pub hybrid_growth: Option<HybridGrowthConfig>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self =
            toml::from_str(text).map_err(|e| SmcError::Config(format!("parse config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Check algorithm/model compatibility and basic sanity.
    pub fn validate(&self) -> Result<()> {
        let run = &self.run;
        if run.n_particles == 0 || run.replicates == 0 {
            return Err(SmcError::Config(
                "n_particles and replicates must be positive".into(),
            ));
        }
        if run.n_tilde < 1 {
            return Err(SmcError::Config("n_tilde must be at least 1".into()));
        }
        let model_is_lv = matches!(self.model, ModelConfig::Lv { .. });
        if model_is_lv && run.algorithm.needs_transition_density() {
            return Err(SmcError::Config(format!(
                "algorithm {} needs a tractable transition density, which the SDE model lacks",
                run.algorithm
            )));
        }
        if run.algorithm.needs_coupled_sampler() && !model_is_lv {
            // Linear Gaussian models also carry a coupled sampler, so only
            // the pairing with guided filters is ruled out.
        }
        if run.algorithm == Algorithm::ITRC && run.n_particles % 2 != 0 {
            return Err(SmcError::Config(
                "the conditionally-correlated smoother needs an even number of particles".into(),
            ));
        }
        if let ModelConfig::LgBenchmark { dim, .. } = self.model {
            if dim == 0 || dim > 8 {
                return Err(SmcError::Config("benchmark dimension must be 1..=8".into()));
            }
        }
        Ok(())
    }
}

/// Results of one replicate.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub replicate: u64,
    /// Additive-function estimate at each time `0..=T`.
    pub estimates: Vec<f64>,
    /// Effective sample size of the filter at each time.
    pub ess: Vec<f64>,
    /// Transition-density evaluations attributed to each time step
    /// (backward sampling only; the filtering pass is excluded).
    pub cost_per_t: Vec<u64>,
    pub total_cost: u64,
    /// Fraction of coupled moves that met (coupling-based algorithms).
    pub meeting_frequency: Option<f64>,
    /// Seconds spent in this replicate (not serialised; results files stay
    /// byte-identical across runs).
    pub wall_time: f64,
}

enum BuiltModel {
    Lg(LgFeynmanKac),
    Lv(LvFeynmanKac),
}

/// Build the model and simulate its shared dataset from the master seed.
fn build_model(config: &ExperimentConfig, seed: u64) -> Result<BuiltModel> {
    let mut data_rng = stream_rng(seed, DATA_STREAM);
    let horizon = config.run.horizon;
    match &config.model {
        ModelConfig::LgBenchmark { dim, alpha, sigma_y2 } => {
            let model = LinearGaussianModel::benchmark(*dim, *alpha, *sigma_y2);
            let (_, obs) = model.simulate_data(horizon, &mut data_rng);
            Ok(BuiltModel::Lg(LgFeynmanKac::new(model, obs)?))
        }
        ModelConfig::LgScalar { sigma_y } => {
            let model = LinearGaussianModel::scalar(*sigma_y);
            let (_, obs) = model.simulate_data(horizon, &mut data_rng);
            Ok(BuiltModel::Lg(LgFeynmanKac::new(model, obs)?))
        }
        ModelConfig::Lv { n_euler_steps } => {
            let model = LotkaVolterraSde::benchmark(*n_euler_steps);
            let (_, obs) = model.simulate_data(horizon, &mut data_rng)?;
            Ok(BuiltModel::Lv(LvFeynmanKac::new(model, obs)?))
        }
    }
}

fn benchmark_function(config: &ExperimentConfig) -> PerStateSum<fn(&DVector<f64>) -> f64> {
    match config.model {
        // Sum of the first coordinate; centred at the stationary point for
        // the population model.
        ModelConfig::Lv { .. } => PerStateSum(|x: &DVector<f64>| x[0] - 100.0),
        _ => PerStateSum(|x: &DVector<f64>| x[0]),
    }
}

/// Run every replicate (optionally in parallel) and collect records plus
/// recorded failures. Fully deterministic for a given `(config, seed)`.
pub fn run_experiment(
    config: &ExperimentConfig,
    seed: u64,
    workers: usize,
) -> Result<(Vec<RunRecord>, Vec<(u64, String)>)> {
    config.validate()?;
    let model = build_model(config, seed)?;
    let psi = benchmark_function(config);

    let run_one = |rep: u64| -> std::result::Result<RunRecord, String> {
        let start = Instant::now();
        let mut rng = stream_rng(seed, rep);
        let result = match &model {
            BuiltModel::Lg(m) => run_replicate(m, &psi, &config.run, rep, &mut rng),
            BuiltModel::Lv(m) => run_replicate(m, &psi, &config.run, rep, &mut rng),
        };
        match result {
            Ok(mut record) => {
                record.wall_time = start.elapsed().as_secs_f64();
                Ok(record)
            }
            Err(e) => Err(e.to_string()),
        }
    };

    let outcomes: Vec<(u64, std::result::Result<RunRecord, String>)> = if workers > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| SmcError::Config(format!("thread pool: {e}")))?;
        pool.install(|| {
            use rayon::prelude::*;
            (0..config.run.replicates as u64)
                .into_par_iter()
                .map(|rep| (rep, run_one(rep)))
                .collect()
        })
    } else {
        (0..config.run.replicates as u64)
            .map(|rep| (rep, run_one(rep)))
            .collect()
    };

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (rep, outcome) in outcomes {
        match outcome {
            Ok(r) => records.push(r),
            Err(e) => failures.push((rep, e)),
        }
    }
    records.sort_by_key(|r| r.replicate);
    Ok((records, failures))
}

/// Run an experiment and serialise the records.
pub fn run_experiment_to_file(
    config: &ExperimentConfig,
    seed: u64,
    workers: usize,
    out: &Path,
) -> Result<()> {
    let (records, failures) = run_experiment(config, seed, workers)?;
    io::write_results(out, config, seed, &records, &failures)
}

fn run_replicate<M: FeynmanKacModel<State = DVector<f64>>>(
    model: &M,
    psi: &dyn AdditiveFunction<DVector<f64>>,
    run: &RunConfig,
    rep: u64,
    rng: &mut crate::rng::Rng,
) -> Result<RunRecord> {
    match run.mode {
        Mode::Online => run_online_replicate(model, psi, run, rep, rng),
        Mode::Offline => run_offline_replicate(model, psi, run, rep, rng),
    }
}

fn backward_sampler_kind(algorithm: Algorithm) -> BackwardSamplerKind {
    match algorithm {
        Algorithm::BP | Algorithm::GP => BackwardSamplerKind::PureRejection,
        _ => BackwardSamplerKind::Hybrid { k: None },
    }
}

fn run_online_replicate<M: FeynmanKacModel<State = DVector<f64>>>(
    model: &M,
    psi: &dyn AdditiveFunction<DVector<f64>>,
    run: &RunConfig,
    rep: u64,
    rng: &mut crate::rng::Rng,
) -> Result<RunRecord> {
    let horizon = model.horizon().min(run.horizon);
    let counter = CostCounter::new();
    let meetings = MeetingStats::new();
    let mut cloud = init_cloud(model, run.n_particles, rng)?;
    let mut stats = SmoothingStatVector::initial(&cloud, psi);

    let mut estimates = Vec::with_capacity(horizon + 1);
    let mut ess = Vec::with_capacity(horizon + 1);
    let mut cost_per_t = Vec::with_capacity(horizon + 1);
    estimates.push(additive_estimate(&cloud, &stats));
    ess.push(cloud.ess());
    cost_per_t.push(0);

    let mut evals_before = 0u64;
    for _ in 1..=horizon {
        let (next, kernel) = match run.algorithm {
            Algorithm::ITR => itr_forward_step(model, &cloud, &meetings, rng)?,
            Algorithm::ITRC => itrc_forward_step(model, &cloud, &meetings, rng)?,
            alg => {
                let filter = alg.filter().expect("tractable algorithm");
                let next = filter_step(model, &cloud, filter, ResamplingScheme::Systematic, rng)?;
                let kernel = match alg {
                    Algorithm::BN | Algorithm::GN => gt_kernel(&next)?,
                    Algorithm::BM | Algorithm::GM => {
                        let proposal = DiscreteSampler::new(&cloud.weights)?;
                        imhp_kernel(model, &cloud, &next, run.n_tilde, &proposal, &counter, rng)?
                    }
                    _ => {
                        let proposal = DiscreteSampler::new(&cloud.weights)?;
                        paris_kernel(
                            model,
                            &cloud,
                            &next,
                            run.n_tilde,
                            backward_sampler_kind(alg),
                            &proposal,
                            &counter,
                            rng,
                        )?
                    }
                };
                (next, kernel)
            }
        };
        stats = online_update(&stats, &kernel, psi, &cloud, &next)?;
        cloud = next;
        estimates.push(additive_estimate(&cloud, &stats));
        ess.push(cloud.ess());
        let evals_now = counter.evals();
        cost_per_t.push(evals_now - evals_before);
        evals_before = evals_now;
    }

    let meeting_frequency = (meetings.attempts() > 0).then(|| meetings.frequency());
    Ok(RunRecord {
        replicate: rep,
        total_cost: cost_per_t.iter().sum(),
        estimates,
        ess,
        cost_per_t,
        meeting_frequency,
        wall_time: 0.0,
    })
}

fn run_offline_replicate<M: FeynmanKacModel<State = DVector<f64>>>(
    model: &M,
    psi: &dyn AdditiveFunction<DVector<f64>>,
    run: &RunConfig,
    rep: u64,
    rng: &mut crate::rng::Rng,
) -> Result<RunRecord> {
    let horizon = model.horizon().min(run.horizon);
    let counter = CostCounter::new();
    let meetings = MeetingStats::new();

    // Forward pass, storing all slices (and the forward-built kernels for
    // the coupling-based algorithms).
    let mut store = crate::smoother::CloudStore::new(crate::smoother::DEFAULT_STORAGE_CAP);
    let mut forward_kernels: Vec<BackwardKernel> = Vec::new();
    store.push(init_cloud(model, run.n_particles, rng)?)?;
    for _ in 1..=horizon {
        let prev = store.clouds().last().unwrap();
        let next = match run.algorithm {
            Algorithm::ITR => {
                let (next, kernel) = itr_forward_step(model, prev, &meetings, rng)?;
                forward_kernels.push(kernel);
                next
            }
            Algorithm::ITRC => {
                let (next, kernel) = itrc_forward_step(model, prev, &meetings, rng)?;
                forward_kernels.push(kernel);
                next
            }
            alg => {
                let filter = alg.filter().expect("tractable algorithm");
                filter_step(model, prev, filter, ResamplingScheme::Systematic, rng)?
            }
        };
        store.push(next)?;
    }
    let clouds = store.into_clouds();

    // Backward pass: draw N trajectories time step by time step so that the
    // cost of each step can be recorded separately.
    let n_traj = run.n_particles;
    let terminal = DiscreteSampler::new(&clouds[horizon].weights)?;
    let mut indices: Vec<Vec<usize>> = vec![vec![0; horizon + 1]; n_traj];
    for traj in indices.iter_mut() {
        traj[horizon] = terminal.sample(rng);
    }
    let mut cost_per_t = vec![0u64; horizon + 1];
    let mut evals_before = counter.evals();
    for t in (1..=horizon).rev() {
        match run.algorithm {
            Algorithm::BN | Algorithm::GN => {
                let kernel = gt_kernel(&clouds[t])?;
                for traj in indices.iter_mut() {
                    traj[t - 1] = kernel.sample_prev(traj[t], rng)?;
                }
            }
            Algorithm::BM | Algorithm::GM => {
                let kernel = ImhKernel::new(
                    model,
                    &clouds[t - 1],
                    &clouds[t],
                    run.n_tilde.saturating_sub(1).max(1),
                    &counter,
                )?;
                for traj in indices.iter_mut() {
                    traj[t - 1] = kernel.sample_prev(traj[t], rng)?;
                }
            }
            Algorithm::ITR | Algorithm::ITRC => {
                let kernel = &forward_kernels[t - 1];
                for traj in indices.iter_mut() {
                    traj[t - 1] = kernel.sample_prev(traj[t], rng)?;
                }
            }
            alg => {
                let kernel = FfbsSamplingKernel::new(
                    model,
                    &clouds[t - 1],
                    &clouds[t],
                    backward_sampler_kind(alg),
                    &counter,
                )?;
                for traj in indices.iter_mut() {
                    traj[t - 1] = kernel.sample_prev(traj[t], rng)?;
                }
            }
        }
        let evals_now = counter.evals();
        cost_per_t[t] = evals_now - evals_before;
        evals_before = evals_now;
    }

    // Estimates: mean over trajectories of the additive partial sums.
    let mut sums: Vec<CompensatedSum> = vec![CompensatedSum::new(); n_traj];
    let mut estimates = Vec::with_capacity(horizon + 1);
    let mut ess = Vec::with_capacity(horizon + 1);
    for t in 0..=horizon {
        let mut total = CompensatedSum::new();
        for (traj, acc) in indices.iter().zip(sums.iter_mut()) {
            let x_cur = &clouds[t].states[traj[t]];
            if t == 0 {
                acc.add(psi.initial(x_cur));
            } else {
                let x_prev = &clouds[t - 1].states[traj[t - 1]];
                acc.add(psi.term(t, x_prev, x_cur));
            }
            total.add(acc.value());
        }
        estimates.push(total.value() / n_traj as f64);
        ess.push(clouds[t].ess());
    }

    let meeting_frequency = (meetings.attempts() > 0).then(|| meetings.frequency());
    Ok(RunRecord {
        replicate: rep,
        total_cost: cost_per_t.iter().sum(),
        estimates,
        ess,
        cost_per_t,
        meeting_frequency,
        wall_time: 0.0,
    })
}

/// Per-time aggregation across replicates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerTimeSummary {
    pub t: usize,
    pub sq_iqr: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub mean_ess: f64,
    pub mean_cost: f64,
}

/// Log-log slope of the squared interquartile range over a time window.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SlopeFit {
    pub from_t: usize,
    pub to_t: usize,
    pub slope: Option<f64>,
}

/// Summary of the estimate at the final time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FinalEstimateSummary {
    pub median: f64,
    pub bootstrap_se: f64,
}

/// JSON summary of one results file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub algorithm: String,
    pub mode: String,
    pub n_particles: usize,
    pub horizon: usize,
    pub replicates_used: usize,
    pub per_t: Vec<PerTimeSummary>,
    pub slope: SlopeFit,
    /// Mean and median of total cost divided by `N * T`.
    pub mean_cost_per_nt: f64,
    pub median_cost_per_nt: f64,
    pub final_estimate: FinalEstimateSummary,
    pub meeting_frequency_mean: Option<f64>,
}

/// Aggregate a results file: per-time quantiles and squared interquartile
/// range, cost per particle per step, and the slope of the squared IQR
/// over `[from_t, to_t]` (defaults to the last four fifths of the run).
pub fn summarize(
    records: &[RunRecord],
    meta: &io::ResultsMeta,
    slope_window: Option<(usize, usize)>,
) -> Result<Summary> {
    if records.len() < 2 {
        return Err(SmcError::MalformedRecord(
            "summaries need at least two replicates".into(),
        ));
    }
    let horizon = records[0].estimates.len() - 1;
    if records.iter().any(|r| r.estimates.len() != horizon + 1) {
        return Err(SmcError::MalformedRecord(
            "replicates with differing horizons".into(),
        ));
    }
    let n_particles = meta.get_usize("n_particles")?;
    let (from_t, to_t) = slope_window.unwrap_or(((horizon / 5).max(1), horizon));

    let mut per_t = Vec::with_capacity(horizon + 1);
    for t in 0..=horizon {
        let estimates: Vec<f64> = records.iter().map(|r| r.estimates[t]).collect();
        let mut sorted = estimates.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let q25 = stats::quantile_sorted(&sorted, 0.25);
        let median = stats::quantile_sorted(&sorted, 0.5);
        let q75 = stats::quantile_sorted(&sorted, 0.75);
        let range = q75 - q25;
        per_t.push(PerTimeSummary {
            t,
            sq_iqr: range * range,
            q25,
            median,
            q75,
            mean_ess: stats::mean(&records.iter().map(|r| r.ess[t]).collect::<Vec<_>>()),
            mean_cost: stats::mean(
                &records
                    .iter()
                    .map(|r| r.cost_per_t[t] as f64)
                    .collect::<Vec<_>>(),
            ),
        });
    }

    let window: Vec<&PerTimeSummary> = per_t
        .iter()
        .filter(|p| p.t >= from_t && p.t <= to_t)
        .collect();
    let slope = stats::log_log_slope(
        &window.iter().map(|p| p.t as f64).collect::<Vec<_>>(),
        &window.iter().map(|p| p.sq_iqr).collect::<Vec<_>>(),
    );

    let nt = (n_particles * horizon.max(1)) as f64;
    let costs_per_nt: Vec<f64> = records
        .iter()
        .map(|r| r.total_cost as f64 / nt)
        .collect();
    let finals: Vec<f64> = records
        .iter()
        .map(|r| *r.estimates.last().unwrap())
        .collect();
    let meeting: Vec<f64> = records
        .iter()
        .filter_map(|r| r.meeting_frequency)
        .collect();

    Ok(Summary {
        algorithm: meta.get_str("algorithm")?.to_string(),
        mode: meta.get_str("mode").unwrap_or("online").to_string(),
        n_particles,
        horizon,
        replicates_used: records.len(),
        per_t,
        slope: SlopeFit {
            from_t,
            to_t,
            slope,
        },
        mean_cost_per_nt: stats::mean(&costs_per_nt),
        median_cost_per_nt: stats::median(&costs_per_nt),
        final_estimate: FinalEstimateSummary {
            median: stats::median(&finals),
            bootstrap_se: stats::bootstrap_median_se(&finals, 1000),
        },
        meeting_frequency_mean: (!meeting.is_empty()).then(|| stats::mean(&meeting)),
    })
}

/// Summarize a file to a JSON file.
pub fn summarize_file(
    input: &Path,
    output: &Path,
    slope_window: Option<(usize, usize)>,
) -> Result<Summary> {
    let (meta, records) = io::read_results(input)?;
    let summary = summarize(&records, &meta, slope_window)?;
    let json = serde_json::to_string_pretty(&summary)
        .map_err(|e| SmcError::Config(format!("serialize summary: {e}")))?;
    std::fs::write(output, json)?;
    Ok(summary)
}

/// Tail diagnostics of per-replicate rejection cost at one time step.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TailReport {
    pub t: usize,
    pub n_particles: usize,
    pub replicates: usize,
    /// Per-replicate mean trials per particle at time `t`.
    pub median: f64,
    pub max: f64,
    pub max_over_median: f64,
    /// How many replicates exceed `multiplier x median`, for multipliers
    /// 2, 5 and 10.
    pub exceedance_counts: Vec<(f64, usize)>,
}

/// Build the tail report from a results file. The diagnostic quantity is
/// the per-replicate cost at time `t` divided by `N` (for rejection-based
/// algorithms the cost is the trial count, so this is the mean number of
/// trials per particle).
pub fn tail_report(records: &[RunRecord], meta: &io::ResultsMeta, t: usize) -> Result<TailReport> {
    if records.is_empty() {
        return Err(SmcError::MalformedRecord("no replicates".into()));
    }
    let n_particles = meta.get_usize("n_particles")?;
    let per_replicate: Vec<f64> = records
        .iter()
        .map(|r| {
            r.cost_per_t
                .get(t)
                .map(|&c| c as f64 / n_particles as f64)
                .ok_or_else(|| SmcError::MalformedRecord(format!("no time {t} in records")))
        })
        .collect::<Result<_>>()?;
    let median = stats::median(&per_replicate);
    let max = per_replicate.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exceedance_counts = [2.0, 5.0, 10.0]
        .iter()
        .map(|&mult| {
            (
                mult,
                per_replicate.iter().filter(|&&v| v > mult * median).count(),
            )
        })
        .collect();
    Ok(TailReport {
        t,
        n_particles,
        replicates: per_replicate.len(),
        median,
        max,
        max_over_median: if median > 0.0 { max / median } else { f64::INFINITY },
        exceedance_counts,
    })
}

/// One grid point of the hybrid-growth report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GrowthPoint {
    pub n_particles: usize,
    /// Mean of `min(trials, N)` per backward draw.
    pub mean_capped_trials: f64,
    pub standard_error: f64,
}

/// Growth of the hybrid sampler's expected cost with `N`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HybridGrowthReport {
    pub points: Vec<GrowthPoint>,
    /// Fitted exponent of `mean ~ N^gamma`.
    pub power_exponent: f64,
    /// Fitted slope of `mean` against `(log N)^(d/2)`.
    pub log_power_coefficient: f64,
    pub monotone_increasing_within_ci: bool,
}

/// Measure `E[min(trials, N)]` of the hybrid rejection sampler over a grid
/// of particle counts on a linear Gaussian model.
pub fn hybrid_growth_report(config: &ExperimentConfig, seed: u64) -> Result<HybridGrowthReport> {
    let growth = config
        .hybrid_growth
        .as_ref()
        .ok_or_else(|| SmcError::Config("missing [hybrid_growth] section".into()))?;
    let (model_dim, model) = match &config.model {
        ModelConfig::LgBenchmark { dim, alpha, sigma_y2 } => (
            *dim,
            LinearGaussianModel::benchmark(*dim, *alpha, *sigma_y2),
        ),
        ModelConfig::LgScalar { sigma_y } => (1, LinearGaussianModel::scalar(*sigma_y)),
        ModelConfig::Lv { .. } => {
            return Err(SmcError::Config(
                "hybrid growth needs a linear Gaussian model".into(),
            ))
        }
    };

    let mut points = Vec::with_capacity(growth.n_grid.len());
    for (grid_idx, &n) in growth.n_grid.iter().enumerate() {
        let mut per_replicate = Vec::with_capacity(growth.replicates);
        for rep in 0..growth.replicates as u64 {
            let mut rng = stream_rng(seed, (grid_idx as u64) << 32 | rep);
            let (_, obs) = model.simulate_data(growth.probe_time, &mut rng);
            let fk = LgFeynmanKac::new(model.clone(), obs)?;
            let clouds = crate::fk::run_filter(
                &fk,
                n,
                FilterKind::Bootstrap,
                ResamplingScheme::Systematic,
                &mut rng,
            )?;
            let prev = &clouds[growth.probe_time - 1];
            let cur = &clouds[growth.probe_time];
            let proposal = DiscreteSampler::new(&prev.weights)?;
            let counter = CostCounter::new();
            for x_t in &cur.states {
                sample_ffbs_hybrid(&fk, prev, x_t, &proposal, &counter, n, &mut rng)?;
            }
            per_replicate.push(counter.trials() as f64 / n as f64);
        }
        points.push(GrowthPoint {
            n_particles: n,
            mean_capped_trials: stats::mean(&per_replicate),
            standard_error: stats::standard_error(&per_replicate),
        });
    }

    let xs: Vec<f64> = points.iter().map(|p| p.n_particles as f64).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.mean_capped_trials).collect();
    let power_exponent = stats::log_log_slope(&xs, &ys).unwrap_or(f64::NAN);
    let log_xs: Vec<f64> = xs
        .iter()
        .map(|&n| n.ln().powf(model_dim as f64 / 2.0))
        .collect();
    let (log_power_coefficient, _) = stats::linear_fit(&log_xs, &ys);
    let monotone = points.windows(2).all(|w| {
        w[1].mean_capped_trials + 2.0 * w[1].standard_error
            > w[0].mean_capped_trials - 2.0 * w[0].standard_error
    });

    Ok(HybridGrowthReport {
        points,
        power_exponent,
        log_power_coefficient,
        monotone_increasing_within_ci: monotone,
    })
}
