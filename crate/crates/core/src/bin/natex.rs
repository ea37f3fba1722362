//! Command-line front end for the `natex` library.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use natex::bench::{
    self, emit_sweep, emit_table, write_run_log, BenchmarkConfig, ConfigFile, TableFormat, ENTROPY_SWEEP_ESTIMATORS,
};
use natex::dataset::{self, CsvMode, GenerationConfig, LoadedDataset};
use natex::estimators::SplitPartition;
use natex::learners::{fit_propensity, RegressorKind, RegressorSpec, WeightScheme};
use natex::metrics::{calibration_curve, dataset_attributes, DatasetAttributes};
use natex::variance::{split_variance_terms, VarianceReport};
use natex::Error;

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_THRESHOLD: u8 = 3;

#[derive(Parser)]
#[command(name = "natex", version, about = "Treatment-effect benchmarks for natural experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a generated dataset with both potential outcomes as CSV.
    Generate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print dataset attributes for a full CSV, sampling one assignment from its propensities.
    Attributes {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the estimator benchmark and print the squared-error table.
    Benchmark {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        learner: Option<LearnerArg>,
        #[arg(long, default_value = "markdown")]
        format: FormatArg,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the per-run log as CSV.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Sweep one axis and write long-format series as CSV.
    Sweep {
        #[arg(long)]
        axis: AxisArg,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        learner: Option<LearnerArg>,
        /// Comma-separated axis levels replacing the defaults.
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<f64>>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare the closed-form split-estimator variance with exact enumeration.
    VerifyVariance {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value = "double")]
        scheme: SchemeArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long, default_value_t = 1e-6)]
        lambda: f64,
    },
    /// Calibration curve of fitted propensities as CSV.
    Calibration {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 10)]
        bins: usize,
        #[arg(long, default_value = "network")]
        learner: LearnerArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum LearnerArg {
    Ridge,
    Network,
}

impl From<LearnerArg> for RegressorKind {
    fn from(l: LearnerArg) -> Self {
        match l {
            LearnerArg::Ridge => RegressorKind::Ridge,
            LearnerArg::Network => RegressorKind::Network,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Markdown,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    N,
    Correlation,
    Entropy,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Unit,
    Single,
    Double,
}

impl From<SchemeArg> for WeightScheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Unit => WeightScheme::Unit,
            SchemeArg::Single => WeightScheme::Single,
            SchemeArg::Double => WeightScheme::Double,
        }
    }
}

enum Failure {
    Lib(Error),
    Threshold(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn main() -> ExitCode {
    match run(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Threshold(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_THRESHOLD)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::Config(_)
                | Error::MissingColumn { .. }
                | Error::Parse { .. }
                | Error::Validation { .. }
                | Error::UnknownEstimator(_)
                | Error::Io { .. }
                | Error::Csv(_) => EXIT_CONFIG,
                _ => EXIT_FAILURE,
            };
            ExitCode::from(code)
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Generate { config, out } => {
            let generation = match config {
                Some(path) => ConfigFile::load(path)?.dataset,
                None => GenerationConfig::default(),
            };
            let full = dataset::generate(&generation)?;
            dataset::save_full_csv(&full, &out)?;
            eprintln!("wrote {} rows to {}", full.len(), out.display());
        }
        Command::Attributes { data, seed } => {
            let full = dataset::load_full_csv(&data)?;
            let z = dataset::sample_treatment(full.propensity(), seed);
            let attrs = dataset_attributes(&full, &z, full.dim())?;
            println!("{}", DatasetAttributes::CSV_HEADER);
            println!("{}", attrs.to_csv_row());
        }
        Command::Benchmark {
            config,
            learner,
            format,
            out,
            log,
        } => {
            let config = benchmark_config(config.as_deref(), learner, None)?;
            print_provenance(&config);
            let table = bench::run_benchmark(&config)?;
            let format = match format {
                FormatArg::Markdown => TableFormat::Markdown,
                FormatArg::Csv => TableFormat::Csv,
            };
            emit(out.as_deref(), &emit_table(&table, format))?;
            if let Some(path) = log {
                emit(Some(&path), &write_run_log(&table.log))?;
            }
            let over = table.over_failure_threshold(config.runs, config.max_failure_fraction);
            if !over.is_empty() {
                let names: Vec<String> = over
                    .iter()
                    .map(|r| format!("{} ({}/{})", r.estimator, r.failures, config.runs))
                    .collect();
                return Err(Failure::Threshold(format!(
                    "failure fraction above {} for {}",
                    config.max_failure_fraction,
                    names.join(", ")
                )));
            }
        }
        Command::Sweep {
            axis,
            config,
            learner,
            levels,
            out,
        } => {
            let entropy_set = matches!(axis, AxisArg::Entropy).then_some(&ENTROPY_SWEEP_ESTIMATORS[..]);
            let config = benchmark_config(config.as_deref(), learner, entropy_set)?;
            print_provenance(&config);
            let result = match axis {
                AxisArg::N => {
                    let ns = match levels {
                        Some(v) => v.iter().map(|&x| level_to_count(x)).collect::<Result<Vec<_>, _>>()?,
                        None => bench::default_ns(),
                    };
                    bench::sweep_by_n(&config, &ns)?
                }
                AxisArg::Correlation => {
                    bench::sweep_by_correlation(&config, &levels.unwrap_or_else(bench::default_noise_sds))?
                }
                AxisArg::Entropy => {
                    bench::sweep_by_entropy(&config, &levels.unwrap_or_else(bench::default_entropy_levels))?
                }
            };
            emit(Some(&out), &emit_sweep(&result))?;
        }
        Command::VerifyVariance {
            n,
            scheme,
            seed,
            d,
            lambda,
        } => {
            let full = dataset::generate(&GenerationConfig {
                n,
                d,
                seed,
                ..GenerationConfig::default()
            })?;
            let split = SplitPartition::random(n, seed);
            let report = split_variance_terms(&full, &split, scheme.into(), lambda)?;
            println!("{}", VarianceReport::CSV_HEADER);
            println!("{}", report.to_csv_row());
            eprintln!(
                "n={n} scheme={} term1={:.6e} term2={:.6e} closed form {:.12e} vs enumerated {:.12e} (diff {:.2e}); enumerated mean {:.2e}",
                WeightScheme::from(scheme).name(),
                report.term1,
                report.term2,
                report.closed_form_total,
                report.enumerated_variance,
                (report.closed_form_total - report.enumerated_variance).abs(),
                report.enumerated_mean
            );
        }
        Command::Calibration {
            data,
            bins,
            learner,
            seed,
        } => {
            let (x, z) = match dataset::load_csv(&data, CsvMode::Full).or_else(|_| dataset::load_csv(&data, CsvMode::Observed))? {
                LoadedDataset::Full(full) => {
                    let z = dataset::sample_treatment(full.propensity(), seed);
                    (full.covariates().to_owned(), z)
                }
                LoadedDataset::Observed(obs) => (obs.covariates().to_owned(), obs.z().to_vec()),
            };
            let spec = RegressorSpec {
                kind: learner.into(),
                ..RegressorSpec::default()
            };
            let p = fit_propensity(x.view(), &z, &spec, seed)?;
            print!("{}", calibration_curve(&p, &z, bins)?.to_csv());
        }
    }
    Ok(())
}

/// Loads the config (or defaults), then applies the learner override and `NATEX_SEED`.
fn benchmark_config(
    path: Option<&Path>,
    learner: Option<LearnerArg>,
    default_estimators: Option<&[natex::estimators::EstimatorKind]>,
) -> natex::Result<BenchmarkConfig> {
    let (mut config, listed) = match path {
        Some(p) => {
            let file = ConfigFile::load(p)?;
            let listed = file.estimator_names().is_some();
            (file.into_benchmark(p.parent())?, listed)
        }
        None => (BenchmarkConfig::default(), false),
    };
    if let (false, Some(kinds)) = (listed, default_estimators) {
        config.estimators = kinds.to_vec();
    }
    if let Some(l) = learner {
        config = config.with_learner_kind(l.into());
    }
    config.apply_env()?;
    config.validate()?;
    Ok(config)
}

fn print_provenance(config: &BenchmarkConfig) {
    eprintln!(
        "config fingerprint {:016x}, master seed {}, {} runs; times exclude shared propensity fitting",
        config.fingerprint(),
        config.master_seed,
        config.runs
    );
}

fn level_to_count(x: f64) -> natex::Result<usize> {
    if x >= 1.0 && x.fract() == 0.0 {
        Ok(x as usize)
    } else {
        Err(Error::Config(format!("subsample size {x} is not a positive integer")))
    }
}

fn emit(path: Option<&Path>, text: &str) -> natex::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Io {
            path: p.to_path_buf(),
            source: e,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
