//! Exact variance of split-training doubly robust estimators.
//!
//! With the split fixed, the estimator depends on the assignment only through
//! the two halves, so every expectation over `z` can be computed exactly by
//! enumerating assignments. [`split_variance_terms`] evaluates the two-term variance
//! decomposition from per-half tables; [`enumerate_moments`] refits under every
//! one of the `2^n` assignments and measures the variance directly.

use ndarray::Axis;
use rand::Rng;
use rayon::prelude::*;

use crate::dataset::{observe, sample_treatment, FullDataset};
use crate::error::{check_len, Error, Result};
use crate::estimators::{estimate, split_from_adjustment, EstimatorKind, EstimatorSettings, SplitPartition};
use crate::learners::{fit_ridge, Learner, Regressor, RegressorSpec, WeightScheme};
use crate::seed;

/// Largest `n` accepted by the exhaustive routines.
pub const MAX_ENUMERATION_N: usize = 14;

/// Default number of `(i, j)` pairs for [`term2_sampled`].
pub const DEFAULT_PAIR_BUDGET: usize = 2000;

/// `y_hat = (1 - p) * f1 + p * f0`.
pub fn adjustment(f1: &[f64], f0: &[f64], p: &[f64]) -> Result<Vec<f64>> {
    check_len("f0", f1.len(), f0.len())?;
    check_len("p", f1.len(), p.len())?;
    Ok(f1.iter().zip(f0).zip(p).map(|((a, b), pi)| (1.0 - pi) * a + pi * b).collect())
}

/// Neumaier compensated summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &Self) {
        self.add(other.sum);
        self.add(other.carry);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Arm regressions fitted on one half of the data under one assignment.
pub trait HalfModel: Sync {
    /// Returns `(f1, f0)` evaluated at `eval`, trained on `train` with treatment `z_train`.
    fn predict(
        &self,
        full: &FullDataset,
        train: &[usize],
        z_train: &[bool],
        eval: &[usize],
    ) -> Result<(Vec<f64>, Vec<f64>)>;
}

/// Weighted ridge per arm; an arm with no rows in the half predicts zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RidgeHalf {
    pub scheme: WeightScheme,
    pub lambda: f64,
}

impl HalfModel for RidgeHalf {
    fn predict(
        &self,
        full: &FullDataset,
        train: &[usize],
        z_train: &[bool],
        eval: &[usize],
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let x_eval = full.covariates().select(Axis(0), eval);
        let p = full.propensity();
        let arm = |treated: bool| -> Result<Vec<f64>> {
            let rows: Vec<usize> = train.iter().zip(z_train).filter(|(_, &t)| t == treated).map(|(&i, _)| i).collect();
            if rows.is_empty() {
                return Ok(vec![0.0; eval.len()]);
            }
            let x = full.covariates().select(Axis(0), &rows);
            let (y, w): (Vec<f64>, Vec<f64>) = if treated {
                rows.iter().map(|&i| (full.y1()[i], self.scheme.treated_weight(p[i]))).unzip()
            } else {
                rows.iter().map(|&i| (full.y0()[i], self.scheme.control_weight(p[i]))).unzip()
            };
            Ok(fit_ridge(x.view(), &y, &w, self.lambda)?.predict(x_eval.view()))
        };
        Ok((arm(true)?, arm(false)?))
    }
}

/// Predicts the true potential outcomes, whatever the assignment.
#[derive(Debug, Clone, Copy, Default)]
pub struct OracleHalf;

impl HalfModel for OracleHalf {
    fn predict(&self, full: &FullDataset, _: &[usize], _: &[bool], eval: &[usize]) -> Result<(Vec<f64>, Vec<f64>)> {
        Ok((eval.iter().map(|&i| full.y1()[i]).collect(), eval.iter().map(|&i| full.y0()[i]).collect()))
    }
}

/// Fixed prediction functions that ignore the assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedFunctionPair {
    pub f1: Regressor,
    pub f0: Regressor,
}

impl FixedFunctionPair {
    /// Residuals `(y1 - f1(x), y0 - f0(x))` on every row.
    pub fn residuals(&self, full: &FullDataset) -> (Vec<f64>, Vec<f64>) {
        let x = full.covariates();
        let r1 = full.y1().iter().zip(self.f1.predict(x)).map(|(y, f)| y - f).collect();
        let r0 = full.y0().iter().zip(self.f0.predict(x)).map(|(y, f)| y - f).collect();
        (r1, r0)
    }
}

impl HalfModel for FixedFunctionPair {
    fn predict(&self, full: &FullDataset, _: &[usize], _: &[bool], eval: &[usize]) -> Result<(Vec<f64>, Vec<f64>)> {
        let x = full.covariates().select(Axis(0), eval);
        Ok((self.f1.predict(x.view()), self.f0.predict(x.view())))
    }
}

/// Exact moments of `tau_hat(z) - tau` under the assignment distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnumeratedMoments {
    pub mean: f64,
    pub variance: f64,
    /// Sum of the assignment probabilities; 1 up to rounding.
    pub total_probability: f64,
}

/// Monte-Carlo moments of `tau_hat - tau`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McMoments {
    pub mean: f64,
    pub variance: f64,
    pub stderr: f64,
    pub runs: usize,
    pub failures: usize,
}

/// The two variance terms next to their enumerated and sampled counterparts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceReport {
    pub term1: f64,
    pub term2: f64,
    pub closed_form_total: f64,
    pub enumerated_mean: f64,
    pub enumerated_variance: f64,
    pub mc_mean: Option<f64>,
    pub mc_variance: Option<f64>,
    pub mc_stderr: Option<f64>,
}

impl VarianceReport {
    pub const CSV_HEADER: &'static str =
        "term1,term2,closed_form_total,enumerated_mean,enumerated_variance,mc_mean,mc_variance,mc_stderr";

    pub fn to_csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        format!(
            "{:e},{:e},{:e},{:e},{:e},{},{},{}",
            self.term1,
            self.term2,
            self.closed_form_total,
            self.enumerated_mean,
            self.enumerated_variance,
            opt(self.mc_mean),
            opt(self.mc_variance),
            opt(self.mc_stderr)
        )
    }

    pub fn with_mc(mut self, mc: &McMoments) -> Self {
        self.mc_mean = Some(mc.mean);
        self.mc_variance = Some(mc.variance);
        self.mc_stderr = Some(mc.stderr);
        self
    }
}

fn guard(full: &FullDataset, split: &SplitPartition) -> Result<()> {
    check_len("split", full.len(), split.len())?;
    if full.len() > MAX_ENUMERATION_N {
        return Err(Error::CostGuard {
            n: full.len(),
            max: MAX_ENUMERATION_N,
        });
    }
    Ok(())
}

fn assignment(mask: u64, n: usize) -> Vec<bool> {
    (0..n).map(|i| mask >> i & 1 == 1).collect()
}

fn probability(p: &[f64], z: &[bool]) -> f64 {
    p.iter().zip(z).map(|(pi, &t)| if t { *pi } else { 1.0 - pi }).product()
}

/// Exact mean and variance of the split estimator with ridge arms.
pub fn enumerate_moments(
    full: &FullDataset,
    split: &SplitPartition,
    scheme: WeightScheme,
    lambda: f64,
) -> Result<EnumeratedMoments> {
    enumerate_moments_with(full, split, &RidgeHalf { scheme, lambda })
}

/// Refits `model` on both halves under each of the `2^n` assignments.
pub fn enumerate_moments_with(
    full: &FullDataset,
    split: &SplitPartition,
    model: &dyn HalfModel,
) -> Result<EnumeratedMoments> {
    guard(full, split)?;
    let n = full.len();
    let (p, tau) = (full.propensity(), full.true_ate());
    let deviation = |z: &[bool]| -> Result<f64> {
        let mut y_hat = vec![0.0; n];
        for (train, eval) in split.folds() {
            let z_train: Vec<bool> = train.iter().map(|&i| z[i]).collect();
            let (f1, f0) = model.predict(full, train, &z_train, eval)?;
            for (k, &i) in eval.iter().enumerate() {
                y_hat[i] = (1.0 - p[i]) * f1[k] + p[i] * f0[k];
            }
        }
        let y: Vec<f64> = (0..n).map(|i| if z[i] { full.y1()[i] } else { full.y0()[i] }).collect();
        Ok(split_from_adjustment(&y, z, p, &y_hat)? - tau)
    };
    enumerate_deviations(p, deviation)
}

/// Exact moments of `f(z)` over all assignments drawn from `p`.
pub fn enumerate_deviations(p: &[f64], f: impl Fn(&[bool]) -> Result<f64> + Sync) -> Result<EnumeratedMoments> {
    let n = p.len();
    if n > MAX_ENUMERATION_N {
        return Err(Error::CostGuard {
            n,
            max: MAX_ENUMERATION_N,
        });
    }
    let masks: Vec<u64> = (0..1u64 << n).collect();
    let chunks: Vec<[CompensatedSum; 3]> = masks
        .par_chunks(256)
        .map(|chunk| {
            let mut acc = [CompensatedSum::default(); 3];
            for &mask in chunk {
                let z = assignment(mask, n);
                let prob = probability(p, &z);
                let dev = f(&z)?;
                acc[0].add(prob);
                acc[1].add(prob * dev);
                acc[2].add(prob * dev * dev);
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut total = [CompensatedSum::default(); 3];
    for acc in &chunks {
        for (t, a) in total.iter_mut().zip(acc) {
            t.merge(a);
        }
    }
    let mean = total[1].value();
    Ok(EnumeratedMoments {
        mean,
        variance: total[2].value() - mean * mean,
        total_probability: total[0].value(),
    })
}

/// Predictions at `eval` for every assignment of the `train` half, indexed by bit mask.
struct HalfTable {
    f1: Vec<Vec<f64>>,
    f0: Vec<Vec<f64>>,
    prob: Vec<f64>,
}

fn half_table(full: &FullDataset, train: &[usize], eval: &[usize], model: &dyn HalfModel) -> Result<HalfTable> {
    let m = train.len();
    let p = full.propensity();
    let train_p: Vec<f64> = train.iter().map(|&i| p[i]).collect();
    let rows: Vec<(Vec<f64>, Vec<f64>, f64)> = (0..1u64 << m)
        .into_par_iter()
        .map(|mask| {
            let z = assignment(mask, m);
            let (f1, f0) = model.predict(full, train, &z, eval)?;
            Ok((f1, f0, probability(&train_p, &z)))
        })
        .collect::<Result<_>>()?;
    let mut table = HalfTable {
        f1: Vec::with_capacity(rows.len()),
        f0: Vec::with_capacity(rows.len()),
        prob: Vec::with_capacity(rows.len()),
    };
    for (f1, f0, prob) in rows {
        table.f1.push(f1);
        table.f0.push(f0);
        table.prob.push(prob);
    }
    Ok(table)
}

/// Per evaluated row `k`: `sum_i E[(r1 sqrt((1-p)/p) + r0 sqrt(p/(1-p)))^2]`, and the
/// matrix of expected sensitivities `E[y_hat_k(z^{t->1}) - y_hat_k(z^{t->0})]`
/// over training positions `t`.
fn half_terms(full: &FullDataset, train: &[usize], eval: &[usize], table: &HalfTable) -> (f64, Vec<Vec<f64>>) {
    let p = full.propensity();
    let mut term1 = CompensatedSum::default();
    for (k, &i) in eval.iter().enumerate() {
        let (s, inv) = (((1.0 - p[i]) / p[i]).sqrt(), (p[i] / (1.0 - p[i])).sqrt());
        for mask in 0..table.prob.len() {
            let r1 = full.y1()[i] - table.f1[mask][k];
            let r0 = full.y0()[i] - table.f0[mask][k];
            let a = r1 * s + r0 * inv;
            term1.add(table.prob[mask] * a * a);
        }
    }
    let y_hat = |mask: usize, k: usize| {
        let pi = p[eval[k]];
        (1.0 - pi) * table.f1[mask][k] + pi * table.f0[mask][k]
    };
    let sens = (0..eval.len())
        .map(|k| {
            (0..train.len())
                .map(|t| {
                    let bit = 1usize << t;
                    let mut acc = CompensatedSum::default();
                    for mask in (0..table.prob.len()).filter(|m| m & bit == 0) {
                        // Probability of the other positions only.
                        let rest = table.prob[mask] / (1.0 - p[train[t]]);
                        acc.add(rest * (y_hat(mask | bit, k) - y_hat(mask, k)));
                    }
                    acc.value()
                })
                .collect()
        })
        .collect();
    (term1.value(), sens)
}

/// Both variance terms for ridge arms and a fixed split, plus the enumerated moments.
pub fn split_variance_terms(
    full: &FullDataset,
    split: &SplitPartition,
    scheme: WeightScheme,
    lambda: f64,
) -> Result<VarianceReport> {
    split_variance_terms_with(full, split, &RidgeHalf { scheme, lambda })
}

/// [`split_variance_terms`] for any half model.
///
/// Pairs inside one half contribute nothing to the second term. For `i` in
/// one half and `j` in the other the two sensitivities depend on disjoint
/// coordinates of `z`, so their expected product factorizes.
pub fn split_variance_terms_with(
    full: &FullDataset,
    split: &SplitPartition,
    model: &dyn HalfModel,
) -> Result<VarianceReport> {
    guard(full, split)?;
    let n2 = (full.len() * full.len()) as f64;
    let (s1, s2) = (split.s1(), split.s2());
    // Rows of S1 are predicted from S2 and the other way round.
    let on_s1 = half_table(full, s2, s1, model)?;
    let on_s2 = half_table(full, s1, s2, model)?;
    let (t1_a, sens_a) = half_terms(full, s2, s1, &on_s1);
    let (t1_b, sens_b) = half_terms(full, s1, s2, &on_s2);

    let mut cross = CompensatedSum::default();
    for (a, row) in sens_a.iter().enumerate() {
        for (b, d_ab) in row.iter().enumerate() {
            cross.add(2.0 * d_ab * sens_b[b][a]);
        }
    }
    let term1 = (t1_a + t1_b) / n2;
    let term2 = cross.value() / n2;
    let moments = enumerate_moments_with(full, split, model)?;
    Ok(VarianceReport {
        term1,
        term2,
        closed_form_total: term1 + term2,
        enumerated_mean: moments.mean,
        enumerated_variance: moments.variance,
        mc_mean: None,
        mc_variance: None,
        mc_stderr: None,
    })
}

/// Averages [`split_variance_terms`] over `splits` seeded random partitions.
pub fn split_variance_averaged(
    full: &FullDataset,
    scheme: WeightScheme,
    lambda: f64,
    splits: usize,
    seed: u64,
) -> Result<VarianceReport> {
    if splits == 0 {
        return Err(Error::InvalidArgument("at least one split is required".into()));
    }
    let reports = (0..splits)
        .map(|k| {
            let split = SplitPartition::random(full.len(), seed::derive(seed, k as u64));
            split_variance_terms(full, &split, scheme, lambda)
        })
        .collect::<Result<Vec<_>>>()?;
    let avg = |f: fn(&VarianceReport) -> f64| reports.iter().map(f).sum::<f64>() / splits as f64;
    Ok(VarianceReport {
        term1: avg(|r| r.term1),
        term2: avg(|r| r.term2),
        closed_form_total: avg(|r| r.closed_form_total),
        enumerated_mean: avg(|r| r.enumerated_mean),
        enumerated_variance: avg(|r| r.enumerated_variance),
        mc_mean: None,
        mc_variance: None,
        mc_stderr: None,
    })
}

/// Monte-Carlo moments of a registered estimator with true propensities and a ridge learner.
pub fn mc_moments(full: &FullDataset, estimator_name: &str, runs: usize, seed: u64) -> Result<McMoments> {
    let kind = EstimatorKind::from_name(estimator_name)?;
    let seeds: Vec<u64> = (0..runs as u64).map(|r| seed::derive(seed, r)).collect();
    mc_moments_seeded(full, kind, &seeds, &RegressorSpec::ridge(1e-6), &EstimatorSettings::default())
}

/// One run per seed: the seed fixes both the assignment and the estimator's own draws.
/// Runs that fail are skipped and counted.
pub fn mc_moments_seeded(
    full: &FullDataset,
    kind: EstimatorKind,
    seeds: &[u64],
    learner: &dyn Learner,
    settings: &EstimatorSettings,
) -> Result<McMoments> {
    if seeds.len() < 2 {
        return Err(Error::InvalidArgument("Monte-Carlo moments need at least two runs".into()));
    }
    let p = full.propensity();
    let tau = full.true_ate();
    let outcomes: Vec<Option<f64>> = seeds
        .par_iter()
        .map(|&s| {
            let z = sample_treatment(p, seed::derive(s, 0));
            let obs = observe(full, &z).ok()?;
            estimate(kind, &obs, p, learner, settings, seed::derive(s, 1)).ok().map(|r| r.estimate - tau)
        })
        .collect();
    let devs: Vec<f64> = outcomes.iter().flatten().copied().collect();
    let runs = devs.len();
    if runs < 2 {
        return Err(Error::InvalidArgument(format!("only {runs} of {} runs succeeded", seeds.len())));
    }
    let mean = devs.iter().sum::<f64>() / runs as f64;
    let variance = devs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (runs - 1) as f64;
    Ok(McMoments {
        mean,
        variance,
        stderr: (variance / runs as f64).sqrt(),
        runs,
        failures: seeds.len() - runs,
    })
}

/// Result of comparing the first variance term with its double-weighted bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmGmCheck {
    pub bound: f64,
    pub term1: f64,
    pub holds: bool,
}

/// Compares `sum (r1 sqrt((1-p)/p) + r0 sqrt(p/(1-p)))^2` with
/// `2 sum (1-p)/p r1^2 + 2 sum p/(1-p) r0^2`.
///
/// Both sides are left unscaled by `1/n^2`. Fixed functions make every row's
/// residuals independent of the assignment and of the split, so `split` only
/// has to match the data.
pub fn amgm_bound_check(full: &FullDataset, fixed: &FixedFunctionPair, split: &SplitPartition) -> Result<AmGmCheck> {
    check_len("split", full.len(), split.len())?;
    let (r1, r0) = fixed.residuals(full);
    let (mut term1, mut bound) = (CompensatedSum::default(), CompensatedSum::default());
    for ((a, b), p) in r1.iter().zip(&r0).zip(full.propensity()) {
        let (w1, w0) = ((1.0 - p) / p, p / (1.0 - p));
        let t = a * w1.sqrt() + b * w0.sqrt();
        term1.add(t * t);
        bound.add(2.0 * w1 * a * a);
        bound.add(2.0 * w0 * b * b);
    }
    let (bound, term1) = (bound.value(), term1.value());
    Ok(AmGmCheck {
        bound,
        term1,
        holds: term1 <= bound + 1e-12,
    })
}

/// Expected double-weighted treatment loss, `E[sum 1[z] (1-p)/p^2 r1^2]`,
/// next to its single-weighted closed form `sum (1-p)/p r1^2`.
pub fn double_weight_expectation_identity(full: &FullDataset, fixed: &FixedFunctionPair) -> (f64, f64) {
    let (r1, _) = fixed.residuals(full);
    let (mut lhs, mut rhs) = (CompensatedSum::default(), CompensatedSum::default());
    for (r, p) in r1.iter().zip(full.propensity()) {
        lhs.add(p * ((1.0 - p) / (p * p)) * r * r);
        rhs.add((1.0 - p) / p * r * r);
    }
    (lhs.value(), rhs.value())
}

/// Sampled estimate of both variance terms where enumeration is infeasible.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampledTerms {
    pub term1: f64,
    /// Standard error of `term1` across the sampled assignments.
    pub term1_stderr: f64,
    pub term2: f64,
    /// Standard error of `term2` from the pair sample.
    pub term2_stderr: f64,
    pub pairs: usize,
}

/// Draws `pairs` assignments, one cross-half pair `(i, j)` per draw, and
/// refits under `z^{j->1}`, `z^{j->0}`, `z^{i->1}`, `z^{i->0}` to get the
/// sensitivity product. `term1` is averaged over the same assignments.
pub fn term2_sampled(
    full: &FullDataset,
    split: &SplitPartition,
    model: &dyn HalfModel,
    pairs: usize,
    seed: u64,
) -> Result<SampledTerms> {
    check_len("split", full.len(), split.len())?;
    if pairs < 2 || split.s1().is_empty() || split.s2().is_empty() {
        return Err(Error::InvalidArgument("need at least two pairs and two nonempty halves".into()));
    }
    let n = full.len();
    let p = full.propensity();
    let (s1, s2) = (split.s1(), split.s2());

    let y_hat_at = |train: &[usize], z_train: &[bool], i: usize| -> Result<f64> {
        let (f1, f0) = model.predict(full, train, z_train, &[i])?;
        Ok((1.0 - p[i]) * f1[0] + p[i] * f0[0])
    };
    // Sensitivity of row `i` (predicted from `train`) to flipping training position `t`.
    let sensitivity = |train: &[usize], z_train: &mut [bool], t: usize, i: usize| -> Result<f64> {
        let keep = z_train[t];
        z_train[t] = true;
        let on = y_hat_at(train, z_train, i)?;
        z_train[t] = false;
        let off = y_hat_at(train, z_train, i)?;
        z_train[t] = keep;
        Ok(on - off)
    };

    let draws: Vec<(f64, f64)> = (0..pairs)
        .into_par_iter()
        .map(|k| {
            let mut rng = seed::rng(seed::derive(seed, k as u64));
            let z = sample_treatment(p, rng.random());
            let (a, b) = (rng.random_range(0..s1.len()), rng.random_range(0..s2.len()));
            let mut z1: Vec<bool> = s1.iter().map(|&i| z[i]).collect();
            let mut z2: Vec<bool> = s2.iter().map(|&i| z[i]).collect();
            let d_i = sensitivity(s2, &mut z2, b, s1[a])?;
            let d_j = sensitivity(s1, &mut z1, a, s2[b])?;

            let mut t1 = 0.0;
            for (train, z_train, eval) in [(s2, &z2, s1), (s1, &z1, s2)] {
                let (f1, f0) = model.predict(full, train, z_train, eval)?;
                for (k, &i) in eval.iter().enumerate() {
                    let r1 = full.y1()[i] - f1[k];
                    let r0 = full.y0()[i] - f0[k];
                    let v = r1 * ((1.0 - p[i]) / p[i]).sqrt() + r0 * (p[i] / (1.0 - p[i])).sqrt();
                    t1 += v * v;
                }
            }
            Ok((d_i * d_j, t1))
        })
        .collect::<Result<_>>()?;

    let m = pairs as f64;
    let scale = 2.0 * (s1.len() * s2.len()) as f64 / (n * n) as f64;
    let mean_prod = draws.iter().map(|d| d.0).sum::<f64>() / m;
    let var_prod = draws.iter().map(|d| (d.0 - mean_prod).powi(2)).sum::<f64>() / (m - 1.0);
    let n2 = (n * n) as f64;
    let mean_t1 = draws.iter().map(|d| d.1).sum::<f64>() / m;
    let var_t1 = draws.iter().map(|d| (d.1 - mean_t1).powi(2)).sum::<f64>() / (m - 1.0);
    Ok(SampledTerms {
        term1: mean_t1 / n2,
        term1_stderr: (var_t1 / m).sqrt() / n2,
        term2: scale * mean_prod,
        term2_stderr: scale * (var_prod / m).sqrt(),
        pairs,
    })
}
