use nalgebra::{DMatrix, DVector};
use ndarray::{ArrayView2, Axis};
use rand::seq::SliceRandom;

use super::network::{self, Head};
use super::{RegressorKind, RegressorSpec};
use crate::dataset::{clamp_propensity, logistic};
use crate::error::{check_len, Error, Result};
use crate::metrics::binary_cross_entropy;
use crate::seed;

const IRLS_MAX_ITER: usize = 50;
/// Share of rows held out to choose the network's epoch count.
const HOLDOUT_FRACTION: f64 = 0.2;
/// Epochs without holdout improvement before the search stops.
const PATIENCE: usize = 10;

/// Estimated propensities truncated to `[0.01, 0.99]`.
pub fn fit_propensity(x: ArrayView2<'_, f64>, z: &[bool], spec: &RegressorSpec, seed: u64) -> Result<Vec<f64>> {
    Ok(fit_propensity_raw(x, z, spec, seed)?
        .into_iter()
        .map(clamp_propensity)
        .collect())
}

/// Untruncated classifier outputs.
///
/// A network spec trains the spec's architecture with a sigmoid head on binary
/// cross entropy. The epoch count is chosen on a seeded holdout (the epoch with
/// the lowest holdout cross entropy, at most `spec.epochs`), then the network is
/// refit on every row for that many epochs. A ridge spec fits an L2-penalized
/// logistic regression by iteratively reweighted least squares.
pub fn fit_propensity_raw(x: ArrayView2<'_, f64>, z: &[bool], spec: &RegressorSpec, seed: u64) -> Result<Vec<f64>> {
    check_len("z", x.nrows(), z.len())?;
    if z.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let treated = z.iter().filter(|&&t| t).count();
    if treated == 0 || treated == z.len() {
        return Err(Error::DegenerateLabels);
    }
    spec.validate()?;
    let labels: Vec<f64> = z.iter().map(|&t| if t { 1.0 } else { 0.0 }).collect();
    match spec.kind {
        RegressorKind::Network => {
            let epochs = holdout_epochs(x, &labels, spec, seed)?;
            let refit = RegressorSpec {
                epochs,
                ..spec.clone()
            };
            let trained = network::train(x, &labels, &vec![1.0; labels.len()], &refit, seed::derive(seed, 1), Head::Logistic)?;
            Ok(trained.model.predict(x))
        }
        RegressorKind::Ridge => logistic_irls(x, &labels, spec.ridge_lambda),
    }
}

/// Epoch with the lowest holdout cross entropy, stopping after
/// [`PATIENCE`] epochs without improvement.
fn holdout_epochs(x: ArrayView2<'_, f64>, labels: &[f64], spec: &RegressorSpec, seed: u64) -> Result<usize> {
    let n = labels.len();
    let n_hold = (n as f64 * HOLDOUT_FRACTION).round() as usize;
    if n_hold == 0 || n_hold == n {
        return Ok(spec.epochs);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(seed::derive(seed, 0)));
    let (hold, fit) = order.split_at(n_hold);
    let x_fit = x.select(Axis(0), fit);
    let y_fit: Vec<f64> = fit.iter().map(|&i| labels[i]).collect();
    let x_hold = x.select(Axis(0), hold);
    let z_hold: Vec<bool> = hold.iter().map(|&i| labels[i] == 1.0).collect();

    let (mut best, mut best_epoch) = (f64::INFINITY, spec.epochs);
    let mut on_epoch = |epoch: usize, model: &network::Mlp| {
        let p: Vec<f64> = model.predict(x_hold.view()).into_iter().map(clamp_propensity).collect();
        let loss = binary_cross_entropy(&p, &z_hold).unwrap_or(f64::INFINITY);
        if loss < best {
            best = loss;
            best_epoch = epoch;
        }
        epoch < best_epoch + PATIENCE
    };
    network::train_with(
        x_fit.view(),
        &y_fit,
        &vec![1.0; y_fit.len()],
        spec,
        seed::derive(seed, 2),
        Head::Logistic,
        &mut on_epoch,
    )?;
    Ok(best_epoch)
}

fn logistic_irls(x: ArrayView2<'_, f64>, labels: &[f64], lambda: f64) -> Result<Vec<f64>> {
    let n = x.nrows();
    let p = x.ncols() + 1;
    let design = DMatrix::from_fn(n, p, |i, j| if j == 0 { 1.0 } else { x[(i, j - 1)] });
    let y = DVector::from_column_slice(labels);
    let mut beta = DVector::<f64>::zeros(p);
    let mut penalty = DMatrix::<f64>::identity(p, p) * lambda.max(1e-8);
    penalty[(0, 0)] = 0.0;

    for _ in 0..IRLS_MAX_ITER {
        let eta = &design * &beta;
        let mu = eta.map(logistic);
        let wts = mu.map(|m| (m * (1.0 - m)).max(1e-10));
        let mut grad = design.transpose() * (&y - &mu);
        grad -= &penalty * &beta;
        let mut hess = penalty.clone();
        for i in 0..n {
            let row = design.row(i);
            hess += wts[i] * row.transpose() * row;
        }
        let delta = match hess.clone().cholesky() {
            Some(c) => c.solve(&grad),
            None => hess.lu().solve(&grad).ok_or(Error::RankDeficient)?,
        };
        beta += &delta;
        if delta.amax() < 1e-10 {
            break;
        }
    }
    Ok((&design * &beta).iter().map(|&e| logistic(e)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_covariates, sample_treatment};
    use ndarray::Array2;

    #[test]
    fn single_class_is_rejected() {
        let x = generate_covariates(10, 2, 1);
        let spec = RegressorSpec::ridge(1e-6);
        assert!(matches!(fit_propensity(x.view(), &[true; 10], &spec, 0), Err(Error::DegenerateLabels)));
        assert!(matches!(fit_propensity(x.view(), &[false; 10], &spec, 0), Err(Error::DegenerateLabels)));
    }

    #[test]
    fn truncation_applies() {
        // Perfectly separable labels push raw outputs towards 0 and 1.
        let x = Array2::from_shape_fn((40, 1), |(i, _)| i as f64 - 19.5);
        let z: Vec<bool> = (0..40).map(|i| i >= 20).collect();
        let spec = RegressorSpec::ridge(1e-6);
        let raw = fit_propensity_raw(x.view(), &z, &spec, 0).unwrap();
        assert!(raw[0] < 0.01 && raw[39] > 0.99);
        let p = fit_propensity(x.view(), &z, &spec, 0).unwrap();
        assert_eq!(p[0], 0.01);
        assert_eq!(p[39], 0.99);
        assert!(p.iter().all(|v| (0.01..=0.99).contains(v)));
    }

    #[test]
    fn constant_covariates_give_base_rate() {
        let x = Array2::from_elem((300, 3), 2.5);
        let probs = vec![0.3; 300];
        let z = sample_treatment(&probs, 8);
        let rate = z.iter().filter(|&&t| t).count() as f64 / 300.0;
        for spec in [RegressorSpec::ridge(1e-6), RegressorSpec::network()] {
            let p = fit_propensity(x.view(), &z, &spec, 3).unwrap();
            assert!(p.iter().all(|v| (v - rate).abs() < 0.02), "{:?}", spec.kind);
        }
    }
}
