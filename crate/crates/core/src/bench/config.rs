use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::GenerationConfig;
use crate::error::{Error, Result};
use crate::estimators::{EstimatorKind, EstimatorSettings};
use crate::learners::{RegressorKind, RegressorSpec};

/// Environment variable that overrides `master_seed`.
pub const SEED_ENV: &str = "NATEX_SEED";

/// Where propensities handed to the estimators come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PropensitySource {
    /// The generator's propensities.
    True,
    /// Classifier output as is.
    Estimated,
    /// Classifier output clipped to `[0.01, 0.99]`.
    EstimatedThenTruncated,
}

impl std::str::FromStr for PropensitySource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "true" => Ok(Self::True),
            "estimated" => Ok(Self::Estimated),
            "estimated-then-truncated" => Ok(Self::EstimatedThenTruncated),
            other => Err(Error::Config(format!("unknown propensity source `{other}`"))),
        }
    }
}

/// Whether one propensity fit per run is shared by every estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PropensitySharing {
    /// Fit once per run; the fit is excluded from estimator timings.
    Shared,
    /// Refit for each estimator; the fit counts toward that estimator's time.
    PerEstimator,
}

/// Input data for a benchmark.
#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    /// Generated once; outcomes are redrawn every run.
    Generated(GenerationConfig),
    /// A full-mode CSV; outcomes stay fixed across runs.
    Csv(PathBuf),
}

/// A validated benchmark configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkConfig {
    pub dataset: DatasetSource,
    pub learner: RegressorSpec,
    pub estimators: Vec<EstimatorKind>,
    pub runs: usize,
    pub subsample: Option<usize>,
    pub master_seed: u64,
    pub propensity_source: PropensitySource,
    pub propensity_sharing: PropensitySharing,
    pub settings: EstimatorSettings,
    pub parallelism: usize,
    /// Record wall times; when off every time is reported as 0.
    pub timing: bool,
    /// Largest tolerated fraction of failed runs for any one estimator.
    pub max_failure_fraction: f64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetSource::Generated(GenerationConfig::default()),
            learner: RegressorSpec::network(),
            estimators: EstimatorKind::ALL.to_vec(),
            runs: 20,
            subsample: Some(5000),
            master_seed: 0,
            propensity_source: PropensitySource::EstimatedThenTruncated,
            propensity_sharing: PropensitySharing::Shared,
            settings: EstimatorSettings::default(),
            parallelism: 1,
            timing: true,
            max_failure_fraction: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct BenchmarkSection {
    data: Option<PathBuf>,
    estimators: Option<Vec<String>>,
    runs: usize,
    subsample: Option<usize>,
    master_seed: u64,
    propensity_source: PropensitySource,
    propensity_sharing: PropensitySharing,
    rd_window: f64,
    strat_bins: usize,
    parallelism: usize,
    timing: bool,
    max_failure_fraction: f64,
}

impl Default for BenchmarkSection {
    fn default() -> Self {
        let c = BenchmarkConfig::default();
        Self {
            data: None,
            estimators: None,
            runs: c.runs,
            subsample: c.subsample,
            master_seed: c.master_seed,
            propensity_source: c.propensity_source,
            propensity_sharing: c.propensity_sharing,
            rd_window: c.settings.rd_window,
            strat_bins: c.settings.strat_bins,
            parallelism: c.parallelism,
            timing: c.timing,
            max_failure_fraction: c.max_failure_fraction,
        }
    }
}

/// The on-disk layout: `[dataset]`, `[learner]` and `[benchmark]` tables.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub dataset: GenerationConfig,
    pub learner: RegressorSpec,
    benchmark: BenchmarkSection,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Estimator names listed in the file, if any.
    pub fn estimator_names(&self) -> Option<&[String]> {
        self.benchmark.estimators.as_deref()
    }

    /// Resolves the file into a benchmark configuration. Relative data paths
    /// are taken relative to `base_dir`.
    pub fn into_benchmark(self, base_dir: Option<&Path>) -> Result<BenchmarkConfig> {
        let b = self.benchmark;
        let dataset = match b.data {
            Some(path) => DatasetSource::Csv(match base_dir {
                Some(dir) if path.is_relative() => dir.join(path),
                _ => path,
            }),
            None => DatasetSource::Generated(self.dataset),
        };
        let estimators = match b.estimators {
            Some(names) => names
                .iter()
                .map(|n| EstimatorKind::from_name(n))
                .collect::<Result<Vec<_>>>()?,
            None => EstimatorKind::ALL.to_vec(),
        };
        let config = BenchmarkConfig {
            dataset,
            learner: self.learner,
            estimators,
            runs: b.runs,
            subsample: b.subsample,
            master_seed: b.master_seed,
            propensity_source: b.propensity_source,
            propensity_sharing: b.propensity_sharing,
            settings: EstimatorSettings {
                rd_window: b.rd_window,
                strat_bins: b.strat_bins,
            },
            parallelism: b.parallelism,
            timing: b.timing,
            max_failure_fraction: b.max_failure_fraction,
        };
        config.validate()?;
        Ok(config)
    }
}

impl BenchmarkConfig {
    /// Reads a TOML config file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        ConfigFile::load(path)?.into_benchmark(path.parent())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        ConfigFile::parse(text)?.into_benchmark(None)
    }

    /// Applies `NATEX_SEED` when it is set.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(raw) = std::env::var(SEED_ENV) {
            self.master_seed = raw
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{SEED_ENV}={raw:?} is not an unsigned integer")))?;
        }
        Ok(())
    }

    pub fn with_learner_kind(mut self, kind: RegressorKind) -> Self {
        self.learner.kind = kind;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.runs == 0 {
            return bad("runs must be at least 1".into());
        }
        if self.estimators.is_empty() {
            return bad("at least one estimator is required".into());
        }
        if self.parallelism == 0 {
            return bad("parallelism must be at least 1".into());
        }
        if self.subsample == Some(0) {
            return bad("subsample must be at least 1".into());
        }
        if !(self.settings.rd_window > 0.0) || self.settings.strat_bins == 0 {
            return bad("rd_window must be positive and strat_bins at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.max_failure_fraction) {
            return bad("max_failure_fraction must lie in [0, 1]".into());
        }
        if let DatasetSource::Generated(g) = &self.dataset {
            g.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        self.learner.validate().map_err(|e| Error::Config(e.to_string()))
    }

    /// Stable hash of everything that influences the results.
    pub fn fingerprint(&self) -> u64 {
        let text = format!(
            "{:?}|{:?}|{:?}|{}|{:?}|{}|{:?}|{:?}|{:?}",
            self.dataset,
            self.learner,
            self.estimators,
            self.runs,
            self.subsample,
            self.master_seed,
            self.propensity_source,
            self.propensity_sharing,
            self.settings
        );
        text.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
    }
}
