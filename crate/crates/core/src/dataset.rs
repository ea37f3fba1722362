//! Semi-synthetic datasets.
//!
//! A [`FullDataset`] carries both potential outcomes and the true propensity
//! of every row, so the true average treatment effect is known. Estimators
//! only ever see an [`ObservedDataset`], produced by [`observe`] from a
//! treatment assignment.
//!
//! The generator follows the literacy-program recipe: control outcomes fall
//! linearly with the propensity (`y0 = 1 - p`), and treatment outcomes match
//! them up to `p = 1/2`, then separate by `effect_scale * sqrt(p - 1/2)`.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::seed;

/// Lower and upper truncation bounds for every propensity in the crate.
pub const PROPENSITY_MIN: f64 = 0.01;
pub const PROPENSITY_MAX: f64 = 0.99;

const STREAM_COVARIATES: u64 = 1;
const STREAM_PROPENSITY: u64 = 2;
const STREAM_OUTCOMES: u64 = 3;

/// Column names with a fixed meaning in CSV files; never treated as covariates.
pub const RESERVED_COLUMNS: [&str; 5] = ["z", "y_obs", "y0", "y1", "p"];

pub fn clamp_propensity(p: f64) -> f64 {
    p.clamp(PROPENSITY_MIN, PROPENSITY_MAX)
}

pub fn logistic(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Ground-truth instance: covariates, both potential outcomes and true propensities.
#[derive(Debug, Clone, PartialEq)]
pub struct FullDataset {
    covariates: Array2<f64>,
    y1: Vec<f64>,
    y0: Vec<f64>,
    propensity: Vec<f64>,
    true_ate: f64,
}

impl FullDataset {
    /// Validates shapes and the propensity range, and caches the true ATE.
    pub fn new(covariates: Array2<f64>, y0: Vec<f64>, y1: Vec<f64>, propensity: Vec<f64>) -> Result<Self> {
        let n = covariates.nrows();
        check_len("y0", n, y0.len())?;
        check_len("y1", n, y1.len())?;
        check_len("propensity", n, propensity.len())?;
        if let Some((row, &p)) = propensity
            .iter()
            .enumerate()
            .find(|(_, p)| !(PROPENSITY_MIN..=PROPENSITY_MAX).contains(*p))
        {
            return Err(Error::Validation {
                row,
                message: format!("propensity {p} outside [{PROPENSITY_MIN}, {PROPENSITY_MAX}]"),
            });
        }
        let true_ate = mean_difference(&y1, &y0);
        Ok(Self {
            covariates,
            y1,
            y0,
            propensity,
            true_ate,
        })
    }

    pub fn len(&self) -> usize {
        self.covariates.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.covariates.ncols()
    }

    pub fn covariates(&self) -> ArrayView2<'_, f64> {
        self.covariates.view()
    }

    pub fn y1(&self) -> &[f64] {
        &self.y1
    }

    pub fn y0(&self) -> &[f64] {
        &self.y0
    }

    pub fn propensity(&self) -> &[f64] {
        &self.propensity
    }

    pub fn true_ate(&self) -> f64 {
        self.true_ate
    }

    /// Same covariates and propensities with new potential outcomes.
    pub fn with_outcomes(&self, y0: Vec<f64>, y1: Vec<f64>) -> Result<Self> {
        Self::new(self.covariates.clone(), y0, y1, self.propensity.clone())
    }

    /// Rows at `indices`, in the given order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let covariates = self.covariates.select(Axis(0), indices);
        let pick = |v: &[f64]| indices.iter().map(|&i| v[i]).collect::<Vec<_>>();
        let y1 = pick(&self.y1);
        let y0 = pick(&self.y0);
        let true_ate = mean_difference(&y1, &y0);
        Self {
            covariates,
            y1,
            y0,
            propensity: pick(&self.propensity),
            true_ate,
        }
    }
}

fn mean_difference(y1: &[f64], y0: &[f64]) -> f64 {
    if y1.is_empty() {
        return 0.0;
    }
    y1.iter().zip(y0).map(|(a, b)| a - b).sum::<f64>() / y1.len() as f64
}

/// What an estimator may see: covariates, assignment and one outcome per row.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedDataset {
    covariates: Array2<f64>,
    z: Vec<bool>,
    y_obs: Vec<f64>,
}

impl ObservedDataset {
    pub fn new(covariates: Array2<f64>, z: Vec<bool>, y_obs: Vec<f64>) -> Result<Self> {
        let n = covariates.nrows();
        check_len("z", n, z.len())?;
        check_len("y_obs", n, y_obs.len())?;
        Ok(Self { covariates, z, y_obs })
    }

    pub fn len(&self) -> usize {
        self.covariates.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.covariates.ncols()
    }

    pub fn covariates(&self) -> ArrayView2<'_, f64> {
        self.covariates.view()
    }

    pub fn z(&self) -> &[bool] {
        &self.z
    }

    pub fn y_obs(&self) -> &[f64] {
        &self.y_obs
    }

    pub fn n_treated(&self) -> usize {
        self.z.iter().filter(|&&t| t).count()
    }
}

/// Parameters of the semi-synthetic generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationConfig {
    pub n: usize,
    pub d: usize,
    /// Slope of the propensity logit along a random covariate direction.
    pub coeff_scale: f64,
    pub target_treated_fraction: f64,
    /// `c` in the treatment-effect curve `c * sqrt(p - 1/2)`.
    pub effect_scale: f64,
    pub outcome_noise_sd: f64,
    pub seed: u64,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            n: 21663,
            d: 10,
            coeff_scale: 1.5,
            target_treated_fraction: 0.443,
            effect_scale: 0.2,
            outcome_noise_sd: 0.05,
            seed: 0,
        }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d == 0 {
            return Err(Error::InvalidArgument("n and d must be at least 1".into()));
        }
        if !(self.target_treated_fraction > PROPENSITY_MIN && self.target_treated_fraction < PROPENSITY_MAX) {
            return Err(Error::InvalidArgument(format!(
                "target_treated_fraction {} must lie in ({PROPENSITY_MIN}, {PROPENSITY_MAX})",
                self.target_treated_fraction
            )));
        }
        if !(self.coeff_scale >= 0.0 && self.effect_scale >= 0.0 && self.outcome_noise_sd >= 0.0) {
            return Err(Error::InvalidArgument(
                "coeff_scale, effect_scale and outcome_noise_sd must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// Builds a full dataset from the config.
pub fn generate(config: &GenerationConfig) -> Result<FullDataset> {
    config.validate()?;
    let x = generate_covariates(config.n, config.d, seed::derive(config.seed, STREAM_COVARIATES));
    let p = generate_propensities(
        x.view(),
        config.coeff_scale,
        config.target_treated_fraction,
        seed::derive(config.seed, STREAM_PROPENSITY),
    )?;
    let (y0, y1) = generate_outcomes(
        &p,
        config.effect_scale,
        config.outcome_noise_sd,
        seed::derive(config.seed, STREAM_OUTCOMES),
    );
    FullDataset::new(x, y0, y1, p)
}

/// Independent standard normal covariates.
pub fn generate_covariates(n: usize, d: usize, seed: u64) -> Array2<f64> {
    let mut rng = seed::rng(seed);
    Array2::from_shape_simple_fn((n, d), || rng.sample(StandardNormal))
}

/// Logistic-linear propensities along a random unit direction, with the
/// intercept bisected so the mean propensity hits the target.
pub fn generate_propensities(
    x: ArrayView2<'_, f64>,
    coeff_scale: f64,
    target_treated_fraction: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    if x.nrows() == 0 {
        return Err(Error::EmptyInput);
    }
    if !(target_treated_fraction > PROPENSITY_MIN && target_treated_fraction < PROPENSITY_MAX) {
        return Err(Error::InvalidArgument(format!(
            "target treated fraction {target_treated_fraction} outside ({PROPENSITY_MIN}, {PROPENSITY_MAX})"
        )));
    }
    if coeff_scale == 0.0 {
        return Ok(vec![target_treated_fraction; x.nrows()]);
    }

    let mut rng = seed::rng(seed);
    let mut beta: Vec<f64> = (0..x.ncols()).map(|_| rng.sample(StandardNormal)).collect();
    let norm = beta.iter().map(|b| b * b).sum::<f64>().sqrt();
    if norm > 0.0 {
        beta.iter_mut().for_each(|b| *b /= norm);
    } else {
        beta[0] = 1.0;
    }
    let scores: Vec<f64> = x
        .rows()
        .into_iter()
        .map(|row| coeff_scale * row.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>())
        .collect();

    let mean_at = |b: f64| scores.iter().map(|s| clamp_propensity(logistic(s + b))).sum::<f64>() / scores.len() as f64;
    let (mut lo, mut hi) = (-100.0_f64, 100.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean_at(mid) < target_treated_fraction {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let intercept = 0.5 * (lo + hi);
    let achieved = mean_at(intercept);
    if (achieved - target_treated_fraction).abs() > 1e-4 {
        return Err(Error::Bisection {
            target: target_treated_fraction,
            achieved,
        });
    }
    Ok(scores.iter().map(|s| clamp_propensity(logistic(s + intercept))).collect())
}

/// Potential outcomes `(y0, y1)` for the given propensities.
pub fn generate_outcomes(p: &[f64], effect_scale: f64, noise_sd: f64, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = seed::rng(seed);
    let mut y0 = Vec::with_capacity(p.len());
    let mut y1 = Vec::with_capacity(p.len());
    for &pi in p {
        let e0: f64 = rng.sample::<f64, _>(StandardNormal) * noise_sd;
        let e1: f64 = rng.sample::<f64, _>(StandardNormal) * noise_sd;
        let control = (1.0 - pi) + e0;
        y0.push(control);
        y1.push(control + effect_scale * (pi - 0.5).max(0.0).sqrt() + e1);
    }
    (y0, y1)
}

/// Independent Bernoulli(p_i) treatment draws.
pub fn sample_treatment(p: &[f64], seed: u64) -> Vec<bool> {
    let mut rng = seed::rng(seed);
    p.iter().map(|&pi| rng.random::<f64>() < pi).collect()
}

/// Masks the unobserved potential outcome of every row.
pub fn observe(full: &FullDataset, z: &[bool]) -> Result<ObservedDataset> {
    check_len("z", full.len(), z.len())?;
    let y_obs = z
        .iter()
        .enumerate()
        .map(|(i, &t)| if t { full.y1[i] } else { full.y0[i] })
        .collect();
    ObservedDataset::new(full.covariates.clone(), z.to_vec(), y_obs)
}

/// Adds i.i.d. Normal(0, sd^2) noise. `sd = 0` returns the input unchanged.
pub fn add_outcome_noise(y: &[f64], sd: f64, seed: u64) -> Vec<f64> {
    if sd == 0.0 {
        return y.to_vec();
    }
    let normal = Normal::new(0.0, sd).expect("sd is finite and nonnegative");
    let mut rng = seed::rng(seed);
    y.iter().map(|v| v + normal.sample(&mut rng)).collect()
}

/// Gaussian noise on the log-odds scale, then logistic and truncation.
pub fn perturb_propensities(p: &[f64], level: f64, seed: u64) -> Vec<f64> {
    if level == 0.0 {
        return p.to_vec();
    }
    let normal = Normal::new(0.0, level).expect("level is finite and nonnegative");
    let mut rng = seed::rng(seed);
    p.iter()
        .map(|&pi| {
            let pi = pi.clamp(1e-12, 1.0 - 1e-12);
            clamp_propensity(logistic(logit(pi) + normal.sample(&mut rng)))
        })
        .collect()
}

/// Which schema to expect when reading a CSV file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsvMode {
    Observed,
    Full,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LoadedDataset {
    Observed(ObservedDataset),
    Full(FullDataset),
}

pub fn load_csv(path: impl AsRef<Path>, mode: CsvMode) -> Result<LoadedDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, mode)
}

pub fn load_full_csv(path: impl AsRef<Path>) -> Result<FullDataset> {
    match load_csv(path, CsvMode::Full)? {
        LoadedDataset::Full(full) => Ok(full),
        LoadedDataset::Observed(_) => unreachable!("full mode yields a full dataset"),
    }
}

pub fn load_observed_csv(path: impl AsRef<Path>) -> Result<ObservedDataset> {
    match load_csv(path, CsvMode::Observed)? {
        LoadedDataset::Observed(obs) => Ok(obs),
        LoadedDataset::Full(_) => unreachable!("observed mode yields an observed dataset"),
    }
}

/// Reads a CSV with a header row. Data rows are numbered from 1.
pub fn read_csv(reader: impl Read, mode: CsvMode) -> Result<LoadedDataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn { column: name.to_owned() })
    };
    let required: &[&str] = match mode {
        CsvMode::Observed => &["z", "y_obs"],
        CsvMode::Full => &["y0", "y1", "p"],
    };
    let required_idx = required.iter().map(|c| find(c)).collect::<Result<Vec<_>>>()?;
    let covariate_idx: Vec<usize> = (0..headers.len())
        .filter(|&i| !RESERVED_COLUMNS.contains(&headers[i].as_str()))
        .collect();

    let mut cov = Vec::new();
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); required.len()];
    let mut n = 0;
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let row = r + 1;
        let cell = |j: usize| -> Result<f64> {
            let raw = record.get(j).unwrap_or("");
            raw.parse::<f64>().map_err(|_| Error::Parse {
                row,
                column: headers[j].clone(),
                value: raw.to_owned(),
            })
        };
        for &j in &covariate_idx {
            cov.push(cell(j)?);
        }
        for (slot, &j) in required_idx.iter().enumerate() {
            cols[slot].push(cell(j)?);
        }
        n += 1;
    }
    let covariates = Array2::from_shape_vec((n, covariate_idx.len()), cov)
        .expect("one value per covariate column per row");

    match mode {
        CsvMode::Observed => {
            let z = cols[0]
                .iter()
                .enumerate()
                .map(|(r, &v)| match v {
                    v if v == 1.0 => Ok(true),
                    v if v == 0.0 => Ok(false),
                    v => Err(Error::Validation {
                        row: r + 1,
                        message: format!("z = {v} is not 0 or 1"),
                    }),
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(LoadedDataset::Observed(ObservedDataset::new(
                covariates,
                z,
                std::mem::take(&mut cols[1]),
            )?))
        }
        CsvMode::Full => {
            let p = std::mem::take(&mut cols[2]);
            if let Some((r, v)) = p.iter().enumerate().find(|(_, &v)| !(v > 0.0 && v < 1.0)) {
                return Err(Error::Validation {
                    row: r + 1,
                    message: format!("p = {v} outside (0, 1)"),
                });
            }
            let y0 = std::mem::take(&mut cols[0]);
            let y1 = std::mem::take(&mut cols[1]);
            let full = FullDataset::new(covariates, y0, y1, p).map_err(|e| match e {
                Error::Validation { row, message } => Error::Validation { row: row + 1, message },
                other => other,
            })?;
            Ok(LoadedDataset::Full(full))
        }
    }
}

fn covariate_header(d: usize) -> Vec<String> {
    (0..d).map(|j| format!("x{j}")).collect()
}

pub fn write_full_csv(full: &FullDataset, writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = covariate_header(full.dim());
    header.extend(["y0", "y1", "p"].map(String::from));
    w.write_record(&header)?;
    for (i, row) in full.covariates.rows().into_iter().enumerate() {
        let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        rec.push(full.y0[i].to_string());
        rec.push(full.y1[i].to_string());
        rec.push(full.propensity[i].to_string());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

pub fn write_observed_csv(obs: &ObservedDataset, writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = covariate_header(obs.dim());
    header.extend(["z", "y_obs"].map(String::from));
    w.write_record(&header)?;
    for (i, row) in obs.covariates.rows().into_iter().enumerate() {
        let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        rec.push(if obs.z[i] { "1" } else { "0" }.to_owned());
        rec.push(obs.y_obs[i].to_string());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

pub fn save_full_csv(full: &FullDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_full_csv(full, std::io::BufWriter::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col_stats(x: &Array2<f64>, j: usize) -> (f64, f64) {
        let c = x.column(j);
        let n = c.len() as f64;
        let m = c.sum() / n;
        let v = c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, v)
    }

    #[test]
    fn covariates_empty_and_deterministic() {
        let e = generate_covariates(0, 3, 1);
        assert_eq!(e.dim(), (0, 3));
        assert_eq!(generate_covariates(5, 2, 7), generate_covariates(5, 2, 7));
        assert_ne!(generate_covariates(5, 2, 7), generate_covariates(5, 2, 8));
    }

    #[test]
    fn covariates_are_standard_normal() {
        let x = generate_covariates(10_000, 4, 3);
        for j in 0..4 {
            let (m, v) = col_stats(&x, j);
            assert!(m.abs() < 0.05, "column {j} mean {m}");
            assert!((v - 1.0).abs() < 0.1, "column {j} variance {v}");
        }
    }

    #[test]
    fn zero_slope_gives_constant_target() {
        let x = generate_covariates(50, 3, 1);
        let p = generate_propensities(x.view(), 0.0, 0.3, 2).unwrap();
        assert!(p.iter().all(|&v| v == 0.3));
    }

    #[test]
    fn propensity_mean_hits_target() {
        let x = generate_covariates(20_000, 10, 11);
        let p = generate_propensities(x.view(), 1.5, 0.443, 12).unwrap();
        let m = p.iter().sum::<f64>() / p.len() as f64;
        assert!((m - 0.443).abs() <= 1e-4);
        assert!(p.iter().all(|v| (PROPENSITY_MIN..=PROPENSITY_MAX).contains(v)));
        let z = sample_treatment(&p, 13);
        let frac = z.iter().filter(|&&t| t).count() as f64 / z.len() as f64;
        assert!((frac - 0.443).abs() < 0.02, "treated fraction {frac}");
    }

    #[test]
    fn propensity_errors_on_bad_target() {
        let x = generate_covariates(10, 2, 1);
        assert!(generate_propensities(x.view(), 1.0, 0.995, 2).is_err());
        assert!(generate_propensities(Array2::zeros((0, 2)).view(), 1.0, 0.5, 2).is_err());
    }

    #[test]
    fn outcome_recipe_noiseless() {
        let (y0, y1) = generate_outcomes(&[0.3, 0.75], 1.0, 0.0, 1);
        assert_eq!(y0[0], 0.7);
        assert_eq!(y1[0], 0.7);
        assert_eq!(y0[1], 0.25);
        assert_eq!(y1[1], 0.75);
    }

    #[test]
    fn treatment_sampling_rates() {
        let p = vec![0.99; 100_000];
        let z = sample_treatment(&p, 5);
        let frac = z.iter().filter(|&&t| t).count() as f64 / 1e5;
        assert!((frac - 0.99).abs() < 0.005);
        assert_eq!(sample_treatment(&p[..100], 9), sample_treatment(&p[..100], 9));

        let low = vec![0.01; 10];
        let total: usize = (0..10_000u64)
            .map(|r| sample_treatment(&low, seed::derive(77, r)).iter().filter(|&&t| t).count())
            .sum();
        let mean = total as f64 / 1e4;
        assert!((mean - 0.1).abs() < 0.03, "mean treated count {mean}");
    }

    fn small_full() -> FullDataset {
        let x = generate_covariates(6, 2, 1);
        FullDataset::new(
            x,
            vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
            vec![1.5, 2.5, 3.5, 4.5, 5.5, 6.5],
            vec![0.2, 0.4, 0.5, 0.6, 0.8, 0.9],
        )
        .unwrap()
    }

    #[test]
    fn observe_masks_outcomes() {
        let full = small_full();
        assert!((full.true_ate() - 0.5).abs() < 1e-15);
        assert_eq!(observe(&full, &[true; 6]).unwrap().y_obs(), full.y1());
        assert_eq!(observe(&full, &[false; 6]).unwrap().y_obs(), full.y0());
        assert!(observe(&full, &[true; 5]).is_err());
        let same = full.with_outcomes(full.y0().to_vec(), full.y0().to_vec()).unwrap();
        let a = observe(&same, &[true, false, true, false, true, false]).unwrap();
        let b = observe(&same, &[false, true, true, true, false, false]).unwrap();
        assert_eq!(a.y_obs(), b.y_obs());
    }

    #[test]
    fn noise_and_perturbation_contracts() {
        let y = vec![0.1, 0.2, 0.3];
        assert_eq!(add_outcome_noise(&y, 0.0, 1), y);
        assert_eq!(add_outcome_noise(&y, 0.5, 1), add_outcome_noise(&y, 0.5, 1));
        let p = vec![0.01, 0.3, 0.99];
        assert_eq!(perturb_propensities(&p, 0.0, 4), p);
        for level in [0.5, 1.0, 5.0, 50.0] {
            let q = perturb_propensities(&p, level, 4);
            assert!(q.iter().all(|v| (PROPENSITY_MIN..=PROPENSITY_MAX).contains(v)));
        }
    }

    #[test]
    fn csv_round_trip_and_schema_errors() {
        let full = generate(&GenerationConfig {
            n: 40,
            d: 3,
            ..Default::default()
        })
        .unwrap();
        let obs = observe(&full, &sample_treatment(full.propensity(), 3)).unwrap();
        let mut buf = Vec::new();
        write_observed_csv(&obs, &mut buf).unwrap();
        match read_csv(buf.as_slice(), CsvMode::Observed).unwrap() {
            LoadedDataset::Observed(back) => assert_eq!(back, obs),
            _ => panic!("wrong mode"),
        }
        let mut buf = Vec::new();
        write_full_csv(&full, &mut buf).unwrap();
        match read_csv(buf.as_slice(), CsvMode::Full).unwrap() {
            LoadedDataset::Full(back) => assert_eq!(back, full),
            _ => panic!("wrong mode"),
        }

        let missing = "a,y_obs\n1,2\n";
        match read_csv(missing.as_bytes(), CsvMode::Observed) {
            Err(Error::MissingColumn { column }) => assert_eq!(column, "z"),
            other => panic!("unexpected {other:?}"),
        }
        let bad_p = "a,y0,y1,p\r\n1,0,1,0.5\r\n2,0,1,1.5\r\n";
        match read_csv(bad_p.as_bytes(), CsvMode::Full) {
            Err(Error::Validation { row, .. }) => assert_eq!(row, 2),
            other => panic!("unexpected {other:?}"),
        }
        let bad_cell = "a,z,y_obs\n1,1,0.5\nfoo,0,0.1\n";
        match read_csv(bad_cell.as_bytes(), CsvMode::Observed) {
            Err(Error::Parse { row, column, .. }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "a");
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
