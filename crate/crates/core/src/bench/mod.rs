//! Benchmark orchestration: repeated seeded runs, sweeps and their reports.
//!
//! Run `k` draws everything from `derive(master_seed, k)`, so its results do
//! not depend on how many other runs exist or on the thread count.

mod config;
mod report;

use rand::seq::index;
use rayon::prelude::*;

pub use config::{BenchmarkConfig, ConfigFile, DatasetSource, PropensitySharing, PropensitySource, SEED_ENV};
pub use report::{
    emit_sweep, emit_table, format_sci3, parse_run_log, parse_sweep_csv, parse_table_csv, write_run_log, ReportRow,
    TableFormat, RUN_LOG_HEADER, SWEEP_HEADER, TABLE_COLUMNS,
};

use crate::dataset::{self, add_outcome_noise, generate_outcomes, observe, perturb_propensities, FullDataset};
use crate::error::{Error, Result};
use crate::estimators::{estimate, EstimatorKind};
use crate::learners::{fit_propensity, fit_propensity_raw};
use crate::metrics::{binary_cross_entropy, distance_correlation, quartile_summary, squared_error, RunSummary};
use crate::seed;

/// Rows used when computing distance correlation for the correlation sweep.
pub const DCOR_SAMPLE: usize = 2000;

/// Estimators of the propensity-accuracy figure.
pub const ENTROPY_SWEEP_ESTIMATORS: [EstimatorKind; 6] = [
    EstimatorKind::RegressionDiscontinuity,
    EstimatorKind::PropensityStratification,
    EstimatorKind::AdjustedDirect,
    EstimatorKind::OffPolicy,
    EstimatorKind::DoubleDouble,
    EstimatorKind::DoublyRobust,
];

/// Default subsample sizes for [`sweep_by_n`]: 1000 to 15000 in steps of 1000.
pub fn default_ns() -> Vec<usize> {
    (1..=15).map(|x| x * 1000).collect()
}

/// Default outcome-noise levels for [`sweep_by_correlation`].
pub fn default_noise_sds() -> Vec<f64> {
    vec![0.0, 0.05, 0.1, 0.2, 0.4, 0.8]
}

/// Default log-odds noise levels for [`sweep_by_entropy`]; on default data the
/// cross entropy axis runs from about 0.5 to 1.0.
pub fn default_entropy_levels() -> Vec<f64> {
    vec![0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0]
}

const STREAM_SUBSAMPLE: u64 = 1;
const STREAM_OUTCOMES: u64 = 2;
const STREAM_TREATMENT: u64 = 3;
const STREAM_PROPENSITY: u64 = 4;
const STREAM_PERTURB: u64 = 5;
const STREAM_NOISE_Y1: u64 = 6;
const STREAM_NOISE_Y0: u64 = 7;
const STREAM_ESTIMATOR: u64 = 100;

/// One estimator evaluated in one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub run: usize,
    pub estimator: String,
    pub seed: u64,
    pub estimate: f64,
    pub truth: f64,
    pub squared_error: f64,
    pub elapsed: f64,
    /// Set when the estimator failed; the numeric fields are then NaN.
    pub error: Option<String>,
}

/// Summary row of one estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub estimator: String,
    /// `None` when every run failed.
    pub summary: Option<RunSummary>,
    pub failures: usize,
}

/// Where a table came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Provenance {
    pub config_fingerprint: u64,
    pub master_seed: u64,
}

/// Aggregated squared errors, one row per configured estimator, plus the raw log.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkTable {
    pub rows: Vec<TableRow>,
    pub provenance: Provenance,
    pub log: Vec<RunRecord>,
    /// Per run: cross entropy of the shared propensities against the assignment.
    pub run_bce: Vec<Option<f64>>,
    /// Per run: outcome-propensity dependence, when requested.
    pub run_dependence: Vec<Option<f64>>,
}

impl BenchmarkTable {
    pub fn row(&self, estimator: EstimatorKind) -> Option<&TableRow> {
        self.rows.iter().find(|r| r.estimator == estimator.name())
    }

    /// Mean squared error of one estimator, NaN if absent.
    pub fn mean_se(&self, estimator: EstimatorKind) -> f64 {
        self.row(estimator).and_then(|r| r.summary).map_or(f64::NAN, |s| s.mean)
    }

    pub fn median_se(&self, estimator: EstimatorKind) -> f64 {
        self.row(estimator).and_then(|r| r.summary).map_or(f64::NAN, |s| s.median)
    }

    /// Estimators whose failure fraction exceeds `max_fraction`.
    pub fn over_failure_threshold(&self, runs: usize, max_fraction: f64) -> Vec<&TableRow> {
        self.rows
            .iter()
            .filter(|r| r.failures as f64 > max_fraction * runs as f64)
            .collect()
    }
}

/// Per-axis median and quartiles of squared error for one estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSeries {
    pub estimator: String,
    pub median: Vec<f64>,
    pub q1: Vec<f64>,
    pub q3: Vec<f64>,
}

/// Squared-error series along one axis.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub axis_name: String,
    pub axis_values: Vec<f64>,
    pub series: Vec<SweepSeries>,
}

impl SweepResult {
    pub fn series(&self, estimator: EstimatorKind) -> Option<&SweepSeries> {
        self.series.iter().find(|s| s.estimator == estimator.name())
    }
}

/// Changes applied to each run's data before estimation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Perturbation {
    /// Gaussian noise added to both potential outcomes.
    pub outcome_noise_sd: f64,
    /// Log-odds noise added to the propensities handed to estimators.
    pub propensity_noise: f64,
    /// Record [`outcome_dependence`] for every run.
    pub measure_dependence: bool,
}

/// Loads or generates the dataset shared by every run.
pub fn base_dataset(config: &BenchmarkConfig) -> Result<FullDataset> {
    match &config.dataset {
        DatasetSource::Generated(g) => dataset::generate(g),
        DatasetSource::Csv(path) => dataset::load_full_csv(path),
    }
}

/// Runs the configured benchmark.
pub fn run_benchmark(config: &BenchmarkConfig) -> Result<BenchmarkTable> {
    let base = base_dataset(config)?;
    run_on(config, &base, Perturbation::default())
}

/// Runs the benchmark on a prepared base dataset with a perturbation.
pub fn run_on(config: &BenchmarkConfig, base: &FullDataset, perturbation: Perturbation) -> Result<BenchmarkTable> {
    config.validate()?;
    if let Some(m) = config.subsample {
        if m > base.len() {
            return Err(Error::Config(format!("subsample {m} exceeds the {} available rows", base.len())));
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.parallelism)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let outcomes: Vec<Result<RunOutcome>> =
        pool.install(|| (0..config.runs).into_par_iter().map(|run| one_run(config, base, perturbation, run)).collect());
    let mut log = Vec::with_capacity(config.runs * config.estimators.len());
    let (mut run_bce, mut run_dependence) = (Vec::new(), Vec::new());
    for outcome in outcomes {
        let outcome = outcome?;
        log.extend(outcome.records);
        run_bce.push(outcome.bce);
        run_dependence.push(outcome.dependence);
    }
    Ok(BenchmarkTable {
        rows: summarize(&config.estimators, &log)?,
        provenance: Provenance {
            config_fingerprint: config.fingerprint(),
            master_seed: config.master_seed,
        },
        log,
        run_bce,
        run_dependence,
    })
}

/// Aggregates a run log into one row per estimator, in the given order.
pub fn summarize(estimators: &[EstimatorKind], log: &[RunRecord]) -> Result<Vec<TableRow>> {
    estimators
        .iter()
        .map(|kind| {
            let mine: Vec<&RunRecord> = log.iter().filter(|r| r.estimator == kind.name()).collect();
            let ok: Vec<&&RunRecord> = mine.iter().filter(|r| r.error.is_none()).collect();
            let values: Vec<f64> = ok.iter().map(|r| r.squared_error).collect();
            let times: Vec<f64> = ok.iter().map(|r| r.elapsed).collect();
            Ok(TableRow {
                estimator: kind.name().to_string(),
                summary: if values.is_empty() { None } else { Some(quartile_summary(&values, &times)?) },
                failures: mine.len() - ok.len(),
            })
        })
        .collect()
}

struct RunOutcome {
    records: Vec<RunRecord>,
    bce: Option<f64>,
    dependence: Option<f64>,
}

fn one_run(config: &BenchmarkConfig, base: &FullDataset, perturbation: Perturbation, run: usize) -> Result<RunOutcome> {
    let run_seed = seed::derive(config.master_seed, run as u64);
    let mut data = match config.subsample {
        Some(m) if m < base.len() => {
            let mut rows = index::sample(&mut seed::rng(seed::derive(run_seed, STREAM_SUBSAMPLE)), base.len(), m).into_vec();
            rows.sort_unstable();
            base.select(&rows)
        }
        _ => base.clone(),
    };
    if let DatasetSource::Generated(g) = &config.dataset {
        let (y0, y1) = generate_outcomes(
            data.propensity(),
            g.effect_scale,
            g.outcome_noise_sd,
            seed::derive(run_seed, STREAM_OUTCOMES),
        );
        data = data.with_outcomes(y0, y1)?;
    }
    if perturbation.outcome_noise_sd > 0.0 {
        let sd = perturbation.outcome_noise_sd;
        let y1 = add_outcome_noise(data.y1(), sd, seed::derive(run_seed, STREAM_NOISE_Y1));
        let y0 = add_outcome_noise(data.y0(), sd, seed::derive(run_seed, STREAM_NOISE_Y0));
        data = data.with_outcomes(y0, y1)?;
    }

    let z = dataset::sample_treatment(data.propensity(), seed::derive(run_seed, STREAM_TREATMENT));
    let obs = observe(&data, &z)?;
    let truth = data.true_ate();
    let prop_seed = seed::derive(run_seed, STREAM_PROPENSITY);
    let propensity = |stream: u64| -> Result<Vec<f64>> {
        let s = seed::derive(prop_seed, stream);
        let p = match config.propensity_source {
            PropensitySource::True => data.propensity().to_vec(),
            PropensitySource::Estimated => fit_propensity_raw(data.covariates(), &z, &config.learner, s)?,
            PropensitySource::EstimatedThenTruncated => fit_propensity(data.covariates(), &z, &config.learner, s)?,
        };
        Ok(perturb_propensities(&p, perturbation.propensity_noise, seed::derive(run_seed, STREAM_PERTURB)))
    };
    let shared = match config.propensity_sharing {
        PropensitySharing::Shared => Some(propensity(0).map_err(|e| e.to_string())),
        PropensitySharing::PerEstimator => None,
    };
    let bce = match &shared {
        Some(Ok(p)) => binary_cross_entropy(p, &z).ok(),
        _ => None,
    };
    let dependence = if perturbation.measure_dependence {
        Some(outcome_dependence(&data)?)
    } else {
        None
    };

    let records = config
        .estimators
        .iter()
        .map(|&kind| {
            let est_seed = seed::derive(run_seed, STREAM_ESTIMATOR + kind as u64);
            let start = std::time::Instant::now();
            let result = match &shared {
                Some(p) => p.clone().map_err(Error::InvalidArgument),
                None => propensity(1 + kind as u64),
            }
            .and_then(|p| estimate(kind, &obs, &p, &config.learner, &config.settings, est_seed));
            let elapsed = if config.timing {
                match (&result, config.propensity_sharing) {
                    (Ok(r), PropensitySharing::Shared) => r.elapsed,
                    _ => start.elapsed().as_secs_f64(),
                }
            } else {
                0.0
            };
            match result {
                Ok(r) => RunRecord {
                    run,
                    estimator: kind.name().to_string(),
                    seed: est_seed,
                    estimate: r.estimate,
                    truth,
                    squared_error: squared_error(r.estimate, truth),
                    elapsed,
                    error: None,
                },
                Err(e) => RunRecord {
                    run,
                    estimator: kind.name().to_string(),
                    seed: est_seed,
                    estimate: f64::NAN,
                    truth,
                    squared_error: f64::NAN,
                    elapsed,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    Ok(RunOutcome {
        records,
        bce,
        dependence,
    })
}

/// Average of `dcor(p, y1)` and `dcor(p, y0)` over the first [`DCOR_SAMPLE`] rows.
pub fn outcome_dependence(data: &FullDataset) -> Result<f64> {
    let m = data.len().min(DCOR_SAMPLE);
    let p = &data.propensity()[..m];
    let a = distance_correlation(p, &data.y1()[..m])?;
    let b = distance_correlation(p, &data.y0()[..m])?;
    Ok(0.5 * (a + b))
}

fn series_from(tables: &[BenchmarkTable], estimators: &[EstimatorKind]) -> Vec<SweepSeries> {
    estimators
        .iter()
        .map(|&kind| {
            let pick = |f: fn(&RunSummary) -> f64| -> Vec<f64> {
                tables
                    .iter()
                    .map(|t| t.row(kind).and_then(|r| r.summary.as_ref()).map_or(f64::NAN, f))
                    .collect()
            };
            SweepSeries {
                estimator: kind.name().to_string(),
                median: pick(|s| s.median),
                q1: pick(|s| s.q1),
                q3: pick(|s| s.q3),
            }
        })
        .collect()
}

/// Mean of the recorded values; NaN if none were recorded.
fn mean_recorded(values: &[Option<f64>]) -> f64 {
    let got: Vec<f64> = values.iter().flatten().copied().collect();
    got.iter().sum::<f64>() / got.len() as f64
}

/// Re-runs the benchmark at each subsample size.
pub fn sweep_by_n(config: &BenchmarkConfig, ns: &[usize]) -> Result<SweepResult> {
    if ns.is_empty() {
        return Err(Error::InvalidArgument("no subsample sizes given".into()));
    }
    let base = base_dataset(config)?;
    let tables = ns
        .iter()
        .map(|&n| {
            let cfg = BenchmarkConfig {
                subsample: Some(n),
                ..config.clone()
            };
            run_on(&cfg, &base, Perturbation::default())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        axis_name: "n".into(),
        axis_values: ns.iter().map(|&n| n as f64).collect(),
        series: series_from(&tables, &config.estimators),
    })
}

/// Adds outcome noise at each level; the axis is the mean outcome-propensity
/// distance correlation across runs.
pub fn sweep_by_correlation(config: &BenchmarkConfig, noise_sds: &[f64]) -> Result<SweepResult> {
    if noise_sds.is_empty() || noise_sds.iter().any(|s| !(*s >= 0.0)) {
        return Err(Error::InvalidArgument("noise levels must be a nonempty list of nonnegative values".into()));
    }
    let base = base_dataset(config)?;
    let tables = noise_sds
        .iter()
        .map(|&sd| {
            run_on(
                config,
                &base,
                Perturbation {
                    outcome_noise_sd: sd,
                    measure_dependence: true,
                    ..Perturbation::default()
                },
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        axis_name: "correlation".into(),
        axis_values: tables.iter().map(|t| mean_recorded(&t.run_dependence)).collect(),
        series: series_from(&tables, &config.estimators),
    })
}

/// Perturbs the propensities handed to estimators at each level; the axis is
/// the mean cross entropy of the perturbed propensities against the assignment.
pub fn sweep_by_entropy(config: &BenchmarkConfig, levels: &[f64]) -> Result<SweepResult> {
    if levels.is_empty() || levels.iter().any(|l| !(*l >= 0.0)) {
        return Err(Error::InvalidArgument("entropy levels must be a nonempty list of nonnegative values".into()));
    }
    let cfg = BenchmarkConfig {
        propensity_sharing: PropensitySharing::Shared,
        ..config.clone()
    };
    let base = base_dataset(&cfg)?;
    let tables = levels
        .iter()
        .map(|&level| {
            run_on(
                &cfg,
                &base,
                Perturbation {
                    propensity_noise: level,
                    ..Perturbation::default()
                },
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        axis_name: "entropy".into(),
        axis_values: tables.iter().map(|t| mean_recorded(&t.run_bce)).collect(),
        series: series_from(&tables, &cfg.estimators),
    })
}
