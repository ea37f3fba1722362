//! Average-treatment-effect estimators.
//!
//! Formula-only estimators take plain slices. Learner-based estimators take an
//! [`ObservedDataset`], a propensity vector supplied by the caller and any
//! [`Learner`]; they never refit propensities. The `*_from_predictions`
//! functions evaluate the doubly robust sums on injected predictions.

use std::time::Instant;

use ndarray::Axis;
use rand::seq::SliceRandom;

use crate::dataset::ObservedDataset;
use crate::error::{check_len, Error, Result};
use crate::learners::{Learner, Regressor, WeightScheme};
use crate::seed;
use crate::variance::adjustment;

/// Maximum number of partitions drawn before giving up on a split.
pub const SPLIT_ATTEMPTS: usize = 16;

/// One point estimate of the average treatment effect.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorResult {
    pub estimate: f64,
    /// Wall time of the call in seconds, internal fits included.
    pub elapsed: f64,
    pub estimator_name: String,
    pub seed: u64,
}

/// A partition of `0..n` into two halves whose sizes differ by at most one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitPartition {
    s1: Vec<usize>,
    s2: Vec<usize>,
}

impl SplitPartition {
    /// Checks that `s1` and `s2` partition `0..n` with balanced sizes.
    pub fn new(mut s1: Vec<usize>, mut s2: Vec<usize>, n: usize) -> Result<Self> {
        if s1.len().abs_diff(s2.len()) > 1 || s1.len() + s2.len() != n {
            return Err(Error::InvalidArgument(format!(
                "halves of sizes {} and {} do not split {n} rows evenly",
                s1.len(),
                s2.len()
            )));
        }
        let mut seen = vec![false; n];
        for &i in s1.iter().chain(&s2) {
            if i >= n || std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidArgument(format!("index {i} is out of range or repeated")));
            }
        }
        s1.sort_unstable();
        s2.sort_unstable();
        Ok(Self { s1, s2 })
    }

    /// First `ceil(n/2)` indices against the rest.
    pub fn contiguous(n: usize) -> Self {
        let cut = n.div_ceil(2);
        Self {
            s1: (0..cut).collect(),
            s2: (cut..n).collect(),
        }
    }

    /// Uniformly random balanced partition.
    pub fn random(n: usize, seed: u64) -> Self {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut seed::rng(seed));
        let s2 = perm.split_off(n.div_ceil(2));
        Self::new(perm, s2, n).expect("a permutation splits evenly")
    }

    /// Random partition redrawn until each half holds treated and control rows.
    pub fn random_with_both_arms(z: &[bool], seed: u64) -> Result<Self> {
        for attempt in 0..SPLIT_ATTEMPTS {
            let split = Self::random(z.len(), seed::derive(seed, attempt as u64));
            if split.has_both_arms(z) {
                return Ok(split);
            }
        }
        Err(Error::DegenerateSplit {
            attempts: SPLIT_ATTEMPTS,
        })
    }

    pub fn s1(&self) -> &[usize] {
        &self.s1
    }

    pub fn s2(&self) -> &[usize] {
        &self.s2
    }

    pub fn len(&self) -> usize {
        self.s1.len() + self.s2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(train, evaluate)` index pairs: each half predicts the other.
    pub fn folds(&self) -> [(&[usize], &[usize]); 2] {
        [(&self.s1, &self.s2), (&self.s2, &self.s1)]
    }

    pub fn has_both_arms(&self, z: &[bool]) -> bool {
        let both = |half: &[usize]| half.iter().any(|&i| z[i]) && half.iter().any(|&i| !z[i]);
        both(&self.s1) && both(&self.s2)
    }
}

/// Tuning knobs for the estimators that need them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorSettings {
    pub rd_window: f64,
    pub strat_bins: usize,
}

impl Default for EstimatorSettings {
    fn default() -> Self {
        Self {
            rd_window: 0.1,
            strat_bins: 10,
        }
    }
}

/// Registry of every estimator, keyed by its canonical name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimatorKind {
    DirectDifference,
    AdjustedDirect,
    HorvitzThompson,
    RegressionDiscontinuity,
    PropensityStratification,
    DirectPrediction,
    DoublyRobust,
    DrWeighting,
    Dr2xWeighting,
    DrSplit,
    DrSplitWeight,
    DoubleDouble,
    OffPolicy,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 13] = [
        Self::DirectDifference,
        Self::AdjustedDirect,
        Self::HorvitzThompson,
        Self::RegressionDiscontinuity,
        Self::PropensityStratification,
        Self::DirectPrediction,
        Self::DoublyRobust,
        Self::DrWeighting,
        Self::Dr2xWeighting,
        Self::DrSplit,
        Self::DrSplitWeight,
        Self::DoubleDouble,
        Self::OffPolicy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::DirectDifference => "direct-difference",
            Self::AdjustedDirect => "adjusted-direct",
            Self::HorvitzThompson => "horvitz-thompson",
            Self::RegressionDiscontinuity => "regression-discontinuity",
            Self::PropensityStratification => "propensity-stratification",
            Self::DirectPrediction => "direct-prediction",
            Self::DoublyRobust => "doubly-robust",
            Self::DrWeighting => "dr-weighting",
            Self::Dr2xWeighting => "dr-2x-weighting",
            Self::DrSplit => "dr-split",
            Self::DrSplitWeight => "dr-split-weight",
            Self::DoubleDouble => "double-double",
            Self::OffPolicy => "off-policy",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == name)
            .ok_or_else(|| Error::UnknownEstimator(name.to_string()))
    }

    /// Whether the estimator fits any regression.
    pub fn uses_learner(self) -> bool {
        !matches!(
            self,
            Self::DirectDifference | Self::HorvitzThompson | Self::RegressionDiscontinuity | Self::PropensityStratification
        )
    }
}

impl std::fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::from_name(s)
    }
}

/// Runs one registered estimator and times it.
pub fn estimate(
    kind: EstimatorKind,
    obs: &ObservedDataset,
    p: &[f64],
    learner: &dyn Learner,
    settings: &EstimatorSettings,
    seed: u64,
) -> Result<EstimatorResult> {
    let start = Instant::now();
    let (y, z) = (obs.y_obs(), obs.z());
    let value = match kind {
        EstimatorKind::DirectDifference => direct_difference(y, z)?,
        EstimatorKind::AdjustedDirect => adjusted_direct(obs, learner, seed)?,
        EstimatorKind::HorvitzThompson => horvitz_thompson(y, z, p)?,
        EstimatorKind::RegressionDiscontinuity => regression_discontinuity(y, z, p, settings.rd_window)?,
        EstimatorKind::PropensityStratification => propensity_stratification(y, z, p, settings.strat_bins)?,
        EstimatorKind::DirectPrediction => direct_prediction(obs, learner, seed)?,
        EstimatorKind::DoublyRobust => doubly_robust(obs, p, learner, WeightScheme::Unit, seed)?,
        EstimatorKind::DrWeighting => doubly_robust(obs, p, learner, WeightScheme::Single, seed)?,
        EstimatorKind::Dr2xWeighting => doubly_robust(obs, p, learner, WeightScheme::Double, seed)?,
        EstimatorKind::DrSplit => doubly_robust_split(obs, p, learner, WeightScheme::Unit, seed)?,
        EstimatorKind::DrSplitWeight => doubly_robust_split(obs, p, learner, WeightScheme::Single, seed)?,
        EstimatorKind::DoubleDouble => doubly_robust_split(obs, p, learner, WeightScheme::Double, seed)?,
        EstimatorKind::OffPolicy => off_policy(obs, p, learner, seed)?,
    };
    if !value.is_finite() {
        return Err(Error::InvalidArgument(format!("{kind} produced a non-finite estimate")));
    }
    Ok(EstimatorResult {
        estimate: value,
        elapsed: start.elapsed().as_secs_f64(),
        estimator_name: kind.name().to_string(),
        seed,
    })
}

/// Rejects propensities outside the open unit interval.
pub fn check_propensity(p: &[f64]) -> Result<()> {
    match p.iter().position(|&v| !(v > 0.0 && v < 1.0)) {
        Some(index) => Err(Error::PropensityDomain { index, value: p[index] }),
        None => Ok(()),
    }
}

fn check_arms(z: &[bool]) -> Result<()> {
    if !z.iter().any(|&t| t) {
        return Err(Error::DegenerateArm { arm: "treated" });
    }
    if z.iter().all(|&t| t) {
        return Err(Error::DegenerateArm { arm: "control" });
    }
    Ok(())
}

/// `(2/n) * sum(y * 1[z] - y * 1[!z])`.
pub fn direct_difference(y_obs: &[f64], z: &[bool]) -> Result<f64> {
    check_len("z", y_obs.len(), z.len())?;
    if y_obs.is_empty() {
        return Err(Error::EmptyInput);
    }
    let total: f64 = y_obs.iter().zip(z).map(|(y, &t)| if t { *y } else { -*y }).sum();
    Ok(2.0 * total / y_obs.len() as f64)
}

/// Inverse-propensity weighted difference of observed outcomes.
pub fn horvitz_thompson(y_obs: &[f64], z: &[bool], p: &[f64]) -> Result<f64> {
    let zero = vec![0.0; y_obs.len()];
    split_from_adjustment(y_obs, z, p, &zero)
}

/// Arm-mean difference among rows with `|p - 1/2| <= window`.
pub fn regression_discontinuity(y_obs: &[f64], z: &[bool], p: &[f64], window: f64) -> Result<f64> {
    check_len("z", y_obs.len(), z.len())?;
    check_len("p", y_obs.len(), p.len())?;
    if !(window > 0.0) {
        return Err(Error::InvalidArgument(format!("window {window} must be positive")));
    }
    let mut arms = [(0.0, 0usize); 2];
    for ((y, &t), &pi) in y_obs.iter().zip(z).zip(p) {
        if pi >= 0.5 - window && pi <= 0.5 + window {
            let arm = &mut arms[usize::from(t)];
            arm.0 += y;
            arm.1 += 1;
        }
    }
    for (arm, name) in arms.iter().zip(["control", "treated"]) {
        if arm.1 == 0 {
            return Err(Error::InsufficientWindowData { window, arm: name });
        }
    }
    Ok(arms[1].0 / arms[1].1 as f64 - arms[0].0 / arms[0].1 as f64)
}

/// Average of within-bin arm-mean differences over `q` equal-width propensity bins.
///
/// Bin `k` (1-based) collects every row with `(k-1)/q <= p <= k/q`, so a value on
/// a shared edge belongs to both neighbours. Bins missing an arm are skipped.
pub fn propensity_stratification(y_obs: &[f64], z: &[bool], p: &[f64], q: usize) -> Result<f64> {
    check_len("z", y_obs.len(), z.len())?;
    check_len("p", y_obs.len(), p.len())?;
    if q == 0 {
        return Err(Error::InvalidArgument("stratification needs at least one bin".into()));
    }
    let qf = q as f64;
    let mut bins = vec![[(0.0, 0usize); 2]; q];
    for ((y, &t), &pi) in y_obs.iter().zip(z).zip(p) {
        let scaled = pi * qf;
        let hi = (scaled.ceil() as usize).clamp(1, q);
        let lo = (scaled.floor() as usize + 1).clamp(1, q);
        for k in lo.min(hi)..=lo.max(hi) {
            let (a, b) = ((k - 1) as f64 / qf, k as f64 / qf);
            if pi >= a && pi <= b {
                let arm = &mut bins[k - 1][usize::from(t)];
                arm.0 += y;
                arm.1 += 1;
            }
        }
    }
    let diffs: Vec<f64> = bins
        .iter()
        .filter(|b| b[0].1 > 0 && b[1].1 > 0)
        .map(|b| b[1].0 / b[1].1 as f64 - b[0].0 / b[0].1 as f64)
        .collect();
    if diffs.is_empty() {
        return Err(Error::NoOverlap);
    }
    Ok(diffs.iter().sum::<f64>() / diffs.len() as f64)
}

/// Direct difference on residuals from one regression fitted to every row.
pub fn adjusted_direct(obs: &ObservedDataset, learner: &dyn Learner, seed: u64) -> Result<f64> {
    check_arms(obs.z())?;
    let n = obs.len();
    let f = learner.fit(obs.covariates(), obs.y_obs(), &vec![1.0; n], seed)?;
    let fitted = f.predict(obs.covariates());
    adjusted_direct_from_predictions(obs.y_obs(), obs.z(), &fitted)
}

/// `(2/n) * sum((y - f) * 1[z] - (y - f) * 1[!z])`.
pub fn adjusted_direct_from_predictions(y_obs: &[f64], z: &[bool], f: &[f64]) -> Result<f64> {
    check_len("f", y_obs.len(), f.len())?;
    let resid: Vec<f64> = y_obs.iter().zip(f).map(|(y, fi)| y - fi).collect();
    direct_difference(&resid, z)
}

/// Mean difference between arm-specific regressions over every row.
pub fn direct_prediction(obs: &ObservedDataset, learner: &dyn Learner, seed: u64) -> Result<f64> {
    let (f1, f0) = fit_arms(obs, &[], learner, WeightScheme::Unit, seed)?;
    let x = obs.covariates();
    let (a, b) = (f1.predict(x), f0.predict(x));
    Ok(a.iter().zip(&b).map(|(u, v)| u - v).sum::<f64>() / obs.len() as f64)
}

/// Doubly robust estimate with both regressions trained on every row.
pub fn doubly_robust(
    obs: &ObservedDataset,
    p: &[f64],
    learner: &dyn Learner,
    scheme: WeightScheme,
    seed: u64,
) -> Result<f64> {
    check_len("p", obs.len(), p.len())?;
    check_propensity(p)?;
    let (f1, f0) = fit_arms(obs, p, learner, scheme, seed)?;
    let x = obs.covariates();
    dr_from_predictions(obs.y_obs(), obs.z(), p, &f1.predict(x), &f0.predict(x))
}

/// Split-training doubly robust estimate on a freshly drawn partition.
pub fn doubly_robust_split(
    obs: &ObservedDataset,
    p: &[f64],
    learner: &dyn Learner,
    scheme: WeightScheme,
    seed: u64,
) -> Result<f64> {
    check_arms(obs.z())?;
    let split = SplitPartition::random_with_both_arms(obs.z(), seed::derive(seed, 0))?;
    doubly_robust_split_with(obs, p, learner, scheme, &split, seed)
}

/// Split-training doubly robust estimate on a given partition.
pub fn doubly_robust_split_with(
    obs: &ObservedDataset,
    p: &[f64],
    learner: &dyn Learner,
    scheme: WeightScheme,
    split: &SplitPartition,
    seed: u64,
) -> Result<f64> {
    let (f1, f0) = split_predictions(obs, p, learner, scheme, split, seed)?;
    let y_hat = adjustment(&f1, &f0, p)?;
    split_from_adjustment(obs.y_obs(), obs.z(), p, &y_hat)
}

/// Out-of-half predictions: row `i` gets `f1`, `f0` fitted on the half not containing `i`.
pub fn split_predictions(
    obs: &ObservedDataset,
    p: &[f64],
    learner: &dyn Learner,
    scheme: WeightScheme,
    split: &SplitPartition,
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = obs.len();
    check_len("p", n, p.len())?;
    check_len("split", n, split.len())?;
    check_propensity(p)?;
    let (mut f1_vals, mut f0_vals) = (vec![0.0; n], vec![0.0; n]);
    for (j, (train, eval)) in split.folds().into_iter().enumerate() {
        let half = subset(obs, train)?;
        let p_half: Vec<f64> = train.iter().map(|&i| p[i]).collect();
        let (f1, f0) = fit_arms(&half, &p_half, learner, scheme, seed::derive(seed, 1 + j as u64))?;
        let x_eval = obs.covariates().select(Axis(0), eval);
        for ((&i, a), b) in eval.iter().zip(f1.predict(x_eval.view())).zip(f0.predict(x_eval.view())) {
            f1_vals[i] = a;
            f0_vals[i] = b;
        }
    }
    Ok((f1_vals, f0_vals))
}

/// Single weighted regression per half, with the adjustment halved.
///
/// `g` is fitted on all rows of one half with weight `1/p^2` when treated and
/// `1/(1-p)^2` otherwise; rows of the other half then use `g(x)/2` as their
/// adjustment. With `g = 0` this is exactly Horvitz-Thompson.
pub fn off_policy(obs: &ObservedDataset, p: &[f64], learner: &dyn Learner, seed: u64) -> Result<f64> {
    check_arms(obs.z())?;
    let split = SplitPartition::random_with_both_arms(obs.z(), seed::derive(seed, 0))?;
    off_policy_with(obs, p, learner, &split, seed)
}

/// [`off_policy`] on a given partition.
pub fn off_policy_with(
    obs: &ObservedDataset,
    p: &[f64],
    learner: &dyn Learner,
    split: &SplitPartition,
    seed: u64,
) -> Result<f64> {
    let n = obs.len();
    check_len("p", n, p.len())?;
    check_len("split", n, split.len())?;
    check_propensity(p)?;
    let mut g_vals = vec![0.0; n];
    for (j, (train, eval)) in split.folds().into_iter().enumerate() {
        let x = obs.covariates().select(Axis(0), train);
        let y: Vec<f64> = train.iter().map(|&i| obs.y_obs()[i]).collect();
        let w: Vec<f64> = train
            .iter()
            .map(|&i| {
                if obs.z()[i] {
                    1.0 / (p[i] * p[i])
                } else {
                    1.0 / ((1.0 - p[i]) * (1.0 - p[i]))
                }
            })
            .collect();
        let g = learner.fit(x.view(), &y, &w, seed::derive(seed, 1 + j as u64))?;
        let x_eval = obs.covariates().select(Axis(0), eval);
        for (&i, v) in eval.iter().zip(g.predict(x_eval.view())) {
            g_vals[i] = v;
        }
    }
    off_policy_from_predictions(obs.y_obs(), obs.z(), p, &g_vals)
}

/// Split form with adjustment `g/2`.
pub fn off_policy_from_predictions(y_obs: &[f64], z: &[bool], p: &[f64], g: &[f64]) -> Result<f64> {
    let half: Vec<f64> = g.iter().map(|v| 0.5 * v).collect();
    split_from_adjustment(y_obs, z, p, &half)
}

/// Standard doubly robust sum on injected per-row predictions.
pub fn dr_from_predictions(y_obs: &[f64], z: &[bool], p: &[f64], f1: &[f64], f0: &[f64]) -> Result<f64> {
    let n = y_obs.len();
    check_len("z", n, z.len())?;
    check_len("p", n, p.len())?;
    check_len("f1", n, f1.len())?;
    check_len("f0", n, f0.len())?;
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    check_propensity(p)?;
    let total: f64 = (0..n)
        .map(|i| {
            let ipw = if z[i] {
                (y_obs[i] - f1[i]) / p[i]
            } else {
                -(y_obs[i] - f0[i]) / (1.0 - p[i])
            };
            ipw + f1[i] - f0[i]
        })
        .sum();
    Ok(total / n as f64)
}

/// `(1/n) * sum((y - y_hat)/p * 1[z] - (y - y_hat)/(1-p) * 1[!z])`.
pub fn split_from_adjustment(y_obs: &[f64], z: &[bool], p: &[f64], y_hat: &[f64]) -> Result<f64> {
    let n = y_obs.len();
    check_len("z", n, z.len())?;
    check_len("p", n, p.len())?;
    check_len("y_hat", n, y_hat.len())?;
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    check_propensity(p)?;
    let total: f64 = (0..n)
        .map(|i| {
            let r = y_obs[i] - y_hat[i];
            if z[i] {
                r / p[i]
            } else {
                -r / (1.0 - p[i])
            }
        })
        .sum();
    Ok(total / n as f64)
}

/// Fits `f1` on treated rows and `f0` on control rows with scheme weights.
/// An empty `p` means unit weights regardless of scheme.
fn fit_arms(
    obs: &ObservedDataset,
    p: &[f64],
    learner: &dyn Learner,
    scheme: WeightScheme,
    seed: u64,
) -> Result<(Regressor, Regressor)> {
    check_arms(obs.z())?;
    let fit = |treated: bool, stream: u64| -> Result<Regressor> {
        let rows: Vec<usize> = (0..obs.len()).filter(|&i| obs.z()[i] == treated).collect();
        let x = obs.covariates().select(Axis(0), &rows);
        let y: Vec<f64> = rows.iter().map(|&i| obs.y_obs()[i]).collect();
        let w: Vec<f64> = rows
            .iter()
            .map(|&i| match (p.is_empty(), treated) {
                (true, _) => 1.0,
                (false, true) => scheme.treated_weight(p[i]),
                (false, false) => scheme.control_weight(p[i]),
            })
            .collect();
        learner.fit(x.view(), &y, &w, seed::derive(seed, stream))
    };
    Ok((fit(true, 11)?, fit(false, 10)?))
}

fn subset(obs: &ObservedDataset, rows: &[usize]) -> Result<ObservedDataset> {
    ObservedDataset::new(
        obs.covariates().select(Axis(0), rows),
        rows.iter().map(|&i| obs.z()[i]).collect(),
        rows.iter().map(|&i| obs.y_obs()[i]).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate, observe, FullDataset, GenerationConfig};
    use crate::learners::{RegressorSpec, ZeroLearner};
    use ndarray::{array, Array2};
    use proptest::prelude::*;

    fn full(n: usize, d: usize, seed: u64) -> FullDataset {
        generate(&GenerationConfig {
            n,
            d,
            seed,
            ..GenerationConfig::default()
        })
        .unwrap()
    }

    /// Probability-weighted average of `f(z)` over every assignment.
    fn enumerate_mean(p: &[f64], mut f: impl FnMut(&[bool]) -> f64) -> f64 {
        let n = p.len();
        let mut total = 0.0;
        for mask in 0u32..(1 << n) {
            let z: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
            let prob: f64 = (0..n).map(|i| if z[i] { p[i] } else { 1.0 - p[i] }).product();
            total += prob * f(&z);
        }
        total
    }

    #[test]
    fn direct_difference_by_hand() {
        assert_eq!(direct_difference(&[1.0, 0.0], &[true, false]).unwrap(), 1.0);
        let y = [3.5; 6];
        let z = [true, false, true, false, true, false];
        assert_eq!(direct_difference(&y, &z).unwrap(), 0.0);
    }

    #[test]
    fn horvitz_thompson_single_row() {
        assert_eq!(horvitz_thompson(&[2.0], &[true], &[0.8]).unwrap(), 2.5);
    }

    #[test]
    fn horvitz_thompson_rejects_boundary_propensity() {
        let err = horvitz_thompson(&[1.0, 2.0], &[true, false], &[0.5, 1.0]).unwrap_err();
        assert!(matches!(err, Error::PropensityDomain { index: 1, .. }));
    }

    #[test]
    fn horvitz_thompson_is_unbiased_over_all_assignments() {
        let data = full(6, 2, 3);
        let p = data.propensity();
        let mean = enumerate_mean(p, |z| {
            let y: Vec<f64> = (0..6).map(|i| if z[i] { data.y1()[i] } else { data.y0()[i] }).collect();
            horvitz_thompson(&y, z, p).unwrap()
        });
        assert!((mean - data.true_ate()).abs() < 1e-12, "{mean} vs {}", data.true_ate());
    }

    #[test]
    fn regression_discontinuity_cases() {
        let err = regression_discontinuity(&[1.0, 2.0], &[true, false], &[0.9, 0.9], 0.1).unwrap_err();
        assert!(matches!(err, Error::InsufficientWindowData { .. }));

        // Rows 0, 1, 3, 4 fall inside [0.4, 0.6]; rows 2 and 5 do not.
        let y = [1.0, 2.0, 50.0, 4.0, 7.0, -9.0];
        let z = [true, true, true, false, false, false];
        let p = [0.4, 0.6, 0.7, 0.45, 0.55, 0.2];
        let want = (1.0 + 2.0) / 2.0 - (4.0 + 7.0) / 2.0;
        assert_eq!(regression_discontinuity(&y, &z, &p, 0.1).unwrap(), want);

        // Paired rows share a control outcome, so the arm means differ by exactly the shift.
        let y_obs = [0.3 + 0.25, 0.3, 1.1 + 0.25, 1.1];
        let z = [true, false, true, false];
        let got = regression_discontinuity(&y_obs, &z, &[0.5; 4], 1.0).unwrap();
        assert!((got - 0.25).abs() < 1e-15);
    }

    #[test]
    fn stratification_cases() {
        let y = [4.0, 1.0, 6.0, 3.0, 8.0];
        let z = [true, false, true, false, true];
        let p = [0.2, 0.3, 0.7, 0.9, 0.1];
        let overall = (4.0 + 6.0 + 8.0) / 3.0 - (1.0 + 3.0) / 2.0;
        assert!((propensity_stratification(&y, &z, &p, 1).unwrap() - overall).abs() < 1e-15);

        // Bin [0, 0.5]: treated {4, 8}, control {1}. Bin [0.5, 1]: treated {6}, control {3}.
        let want = ((6.0 - 1.0) + (6.0 - 3.0)) / 2.0;
        assert!((propensity_stratification(&y, &z, &p, 2).unwrap() - want).abs() < 1e-15);

        // p = 0.5 sits on the shared edge and counts in both bins.
        let y = [10.0, 0.0, 2.0, 5.0];
        let z = [true, false, false, true];
        let p = [0.5, 0.25, 0.75, 0.9];
        let want = ((10.0 - 0.0) + (7.5 - 2.0)) / 2.0;
        assert!((propensity_stratification(&y, &z, &p, 2).unwrap() - want).abs() < 1e-15);

        let err = propensity_stratification(&[1.0, 2.0], &[true, false], &[0.1, 0.9], 2).unwrap_err();
        assert!(matches!(err, Error::NoOverlap));
    }

    #[test]
    fn stratification_recovers_paired_shift() {
        let p = [0.05, 0.05, 0.35, 0.35, 0.62, 0.62, 0.97, 0.97];
        let y0 = [0.1, 0.1, 0.4, 0.4, -2.0, -2.0, 3.0, 3.0];
        let z = [true, false, false, true, true, false, false, true];
        let y: Vec<f64> = y0.iter().zip(&z).map(|(v, &t)| if t { v + 0.75 } else { *v }).collect();
        for q in [1, 2, 4, 10] {
            let got = propensity_stratification(&y, &z, &p, q).unwrap();
            assert!((got - 0.75).abs() < 1e-12, "q={q}: {got}");
        }
    }

    #[test]
    fn adjusted_direct_reductions() {
        let data = full(40, 2, 4);
        let z = crate::dataset::sample_treatment(data.propensity(), 5);
        let obs = observe(&data, &z).unwrap();
        let zero = adjusted_direct(&obs, &ZeroLearner, 0).unwrap();
        assert_eq!(zero, direct_difference(obs.y_obs(), obs.z()).unwrap());
        let exact = adjusted_direct_from_predictions(obs.y_obs(), obs.z(), obs.y_obs()).unwrap();
        assert_eq!(exact, 0.0);
        assert!(matches!(
            adjusted_direct(&observe(&data, &[true; 40]).unwrap(), &ZeroLearner, 0),
            Err(Error::DegenerateArm { arm: "control" })
        ));
    }

    #[test]
    fn adjusted_direct_hand_instance() {
        // One covariate, lambda = 0: ordinary least squares with intercept.
        let x = array![[0.0], [1.0], [2.0], [3.0]];
        let y = vec![1.0, 2.0, 2.0, 5.0];
        let z = vec![true, false, true, false];
        // slope = cov(x, y) / var(x) = (4.5 - 1.5*2.5) / 1.25 = 1.2; intercept = 2.5 - 1.2*1.5 = 0.7.
        let fitted = [0.7, 1.9, 3.1, 4.3];
        let resid: Vec<f64> = y.iter().zip(fitted).map(|(a, b)| a - b).collect();
        let want = 2.0 / 4.0 * (resid[0] - resid[1] + resid[2] - resid[3]);
        let obs = ObservedDataset::new(x, z, y).unwrap();
        let got = adjusted_direct(&obs, &RegressorSpec::ridge(0.0), 0).unwrap();
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }

    #[test]
    fn direct_prediction_on_linear_outcomes() {
        let x = crate::dataset::generate_covariates(300, 3, 8);
        let y0: Vec<f64> = x.rows().into_iter().map(|r| 0.5 + r[0] - 2.0 * r[2]).collect();
        let y1: Vec<f64> = x.rows().into_iter().map(|r| 1.7 + 0.3 * r[1] + r[2]).collect();
        let p = vec![0.4; 300];
        let data = FullDataset::new(x, y0, y1, p.clone()).unwrap();
        let obs = observe(&data, &crate::dataset::sample_treatment(&p, 9)).unwrap();
        let got = direct_prediction(&obs, &RegressorSpec::ridge(1e-10), 0).unwrap();
        assert!((got - data.true_ate()).abs() < 1e-6);
        assert_eq!(direct_prediction(&obs, &ZeroLearner, 0).unwrap(), 0.0);
    }

    #[test]
    fn direct_prediction_identical_arms_cancel() {
        let x = array![[0.0], [1.0], [0.0], [1.0]];
        let obs = ObservedDataset::new(x, vec![true, true, false, false], vec![1.0, 3.0, 1.0, 3.0]).unwrap();
        assert_eq!(direct_prediction(&obs, &RegressorSpec::ridge(1e-3), 0).unwrap(), 0.0);
    }

    #[test]
    fn doubly_robust_with_zero_learner_is_horvitz_thompson() {
        let data = full(50, 3, 6);
        let z = crate::dataset::sample_treatment(data.propensity(), 7);
        let obs = observe(&data, &z).unwrap();
        let p = data.propensity();
        let ht = horvitz_thompson(obs.y_obs(), obs.z(), p).unwrap();
        for scheme in [WeightScheme::Unit, WeightScheme::Single, WeightScheme::Double] {
            let dr = doubly_robust(&obs, p, &ZeroLearner, scheme, 0).unwrap();
            assert!((dr - ht).abs() < 1e-12);
        }
        assert_eq!(off_policy(&obs, p, &ZeroLearner, 3).unwrap(), ht);
    }

    #[test]
    fn oracle_predictions_are_exact_for_every_assignment() {
        let data = full(8, 2, 10);
        let (y1, y0, p) = (data.y1(), data.y0(), data.propensity());
        let y_hat = adjustment(y1, y0, p).unwrap();
        for mask in 0u32..256 {
            let z: Vec<bool> = (0..8).map(|i| mask >> i & 1 == 1).collect();
            let y: Vec<f64> = (0..8).map(|i| if z[i] { y1[i] } else { y0[i] }).collect();
            let dr = dr_from_predictions(&y, &z, p, y1, y0).unwrap();
            let sp = split_from_adjustment(&y, &z, p, &y_hat).unwrap();
            assert!((dr - data.true_ate()).abs() < 1e-12);
            assert!((sp - data.true_ate()).abs() < 1e-12);
        }
    }

    #[test]
    fn split_partition_contract() {
        for n in [0, 1, 2, 7, 10] {
            let s = SplitPartition::random(n, n as u64);
            let mut all: Vec<usize> = s.s1().iter().chain(s.s2()).copied().collect();
            all.sort_unstable();
            assert_eq!(all, (0..n).collect::<Vec<_>>());
            assert!(s.s1().len().abs_diff(s.s2().len()) <= 1);
        }
        assert!(SplitPartition::new(vec![0, 1, 2], vec![3], 4).is_err());
        assert!(SplitPartition::new(vec![0, 1], vec![1, 3], 4).is_err());
        let err = SplitPartition::random_with_both_arms(&[true, true, false, true], 0).unwrap_err();
        assert!(matches!(err, Error::DegenerateSplit { attempts: SPLIT_ATTEMPTS }));
    }

    #[test]
    fn registry_round_trips() {
        for kind in EstimatorKind::ALL {
            assert_eq!(EstimatorKind::from_name(kind.name()).unwrap(), kind);
        }
        assert!(matches!(EstimatorKind::from_name("tmle"), Err(Error::UnknownEstimator(_))));
    }

    #[test]
    fn estimators_are_deterministic() {
        let data = full(120, 3, 12);
        let z = crate::dataset::sample_treatment(data.propensity(), 13);
        let obs = observe(&data, &z).unwrap();
        let spec = RegressorSpec::ridge(1e-6);
        for kind in EstimatorKind::ALL {
            let settings = EstimatorSettings {
                rd_window: 0.3,
                ..EstimatorSettings::default()
            };
            let a = estimate(kind, &obs, data.propensity(), &spec, &settings, 77).unwrap();
            let b = estimate(kind, &obs, data.propensity(), &spec, &settings, 77).unwrap();
            assert_eq!(a.estimate, b.estimate, "{kind}");
            assert_eq!(a.estimator_name, kind.name());
        }
    }

    fn shifted(y: &[f64], c: f64) -> Vec<f64> {
        y.iter().map(|v| v + c).collect()
    }

    #[test]
    fn formula_estimators_under_a_location_shift() {
        let c = 3.25;
        let data = full(8, 2, 14);
        let p = data.propensity().to_vec();
        let moved = data.with_outcomes(shifted(data.y0(), c), shifted(data.y1(), c)).unwrap();
        let tau = data.true_ate();
        assert!((moved.true_ate() - tau).abs() < 1e-12);
        let p_mid = vec![0.5; 8];
        let (mut ht_a, mut ht_b) = (0.0, 0.0);
        for mask in 0u32..256 {
            let z: Vec<bool> = (0..8).map(|i| mask >> i & 1 == 1).collect();
            let prob: f64 = (0..8).map(|i| if z[i] { p[i] } else { 1.0 - p[i] }).product();
            let (a, b) = (observe(&data, &z).unwrap(), observe(&moved, &z).unwrap());
            let (ya, yb) = (a.y_obs(), b.y_obs());

            // Arm-mean contrasts see the shift on both sides and cancel it.
            if let Ok(ra) = regression_discontinuity(ya, &z, &p_mid, 0.1) {
                let rb = regression_discontinuity(yb, &z, &p_mid, 0.1).unwrap();
                assert!((rb - tau - (ra - tau)).abs() < 1e-12);
            }
            if let Ok(sa) = propensity_stratification(ya, &z, &p, 4) {
                let sb = propensity_stratification(yb, &z, &p, 4).unwrap();
                assert!((sb - sa).abs() < 1e-12);
            }

            // The sums pick up c times a known assignment-only term.
            let n1 = a.n_treated() as f64;
            let dd_drift = 2.0 * c * (2.0 * n1 - 8.0) / 8.0;
            let dd = direct_difference(yb, &z).unwrap() - direct_difference(ya, &z).unwrap();
            assert!((dd - dd_drift).abs() < 1e-12);
            let ht_drift = c * (0..8).map(|i| if z[i] { 1.0 / p[i] } else { -1.0 / (1.0 - p[i]) }).sum::<f64>() / 8.0;
            let (ha, hb) = (horvitz_thompson(ya, &z, &p).unwrap(), horvitz_thompson(yb, &z, &p).unwrap());
            assert!((hb - ha - ht_drift).abs() < 1e-12);
            ht_a += prob * ha;
            ht_b += prob * hb;
        }
        // That term has mean zero, so the exact expected estimate does not move.
        assert!((ht_a - ht_b).abs() < 1e-12 && (ht_a - tau).abs() < 1e-12);
    }

    #[test]
    fn zero_learner_split_is_horvitz_thompson() {
        let data = full(30, 2, 15);
        let z = crate::dataset::sample_treatment(data.propensity(), 16);
        let obs = observe(&data, &z).unwrap();
        let p = data.propensity();
        let ht = horvitz_thompson(obs.y_obs(), &z, p).unwrap();
        let dd = doubly_robust_split(&obs, p, &ZeroLearner, WeightScheme::Double, 1).unwrap();
        assert_eq!(dd, ht);
    }

    #[test]
    fn single_arm_data_is_rejected() {
        let obs = ObservedDataset::new(Array2::zeros((3, 1)), vec![false; 3], vec![1.0; 3]).unwrap();
        let p = [0.5; 3];
        assert!(matches!(
            doubly_robust(&obs, &p, &ZeroLearner, WeightScheme::Unit, 0),
            Err(Error::DegenerateArm { arm: "treated" })
        ));
        assert!(doubly_robust_split(&obs, &p, &ZeroLearner, WeightScheme::Unit, 0).is_err());
    }

    proptest! {
        #[test]
        fn split_form_equals_standard_form(
            rows in proptest::collection::vec((0.01f64..0.99, -5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0, any::<bool>()), 1..60)
        ) {
            let p: Vec<f64> = rows.iter().map(|r| r.0).collect();
            let f1: Vec<f64> = rows.iter().map(|r| r.1).collect();
            let f0: Vec<f64> = rows.iter().map(|r| r.2).collect();
            let y: Vec<f64> = rows.iter().map(|r| r.3).collect();
            let z: Vec<bool> = rows.iter().map(|r| r.4).collect();
            let y_hat = adjustment(&f1, &f0, &p).unwrap();
            let a = split_from_adjustment(&y, &z, &p, &y_hat).unwrap();
            let b = dr_from_predictions(&y, &z, &p, &f1, &f0).unwrap();
            prop_assert!((a - b).abs() < 1e-12, "{} vs {}", a, b);
        }

        #[test]
        fn uniform_propensity_collapses_to_direct_difference(
            rows in proptest::collection::vec((-10.0f64..10.0, any::<bool>()), 1..50)
        ) {
            let y: Vec<f64> = rows.iter().map(|r| r.0).collect();
            let z: Vec<bool> = rows.iter().map(|r| r.1).collect();
            let ht = horvitz_thompson(&y, &z, &vec![0.5; y.len()]).unwrap();
            prop_assert_eq!(ht, direct_difference(&y, &z).unwrap());
        }
    }
}
