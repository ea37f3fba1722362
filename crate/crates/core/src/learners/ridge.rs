use nalgebra::{DMatrix, DVector};
use ndarray::{ArrayView1, ArrayView2};

use super::Regressor;
use crate::error::{check_len, Error, Result};

/// `x . coef + intercept`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub intercept: f64,
    pub coef: Vec<f64>,
}

impl LinearModel {
    pub fn predict_row(&self, x: ArrayView1<'_, f64>) -> f64 {
        self.intercept + x.iter().zip(&self.coef).map(|(a, b)| a * b).sum::<f64>()
    }
}

/// Weighted ridge with an unpenalized intercept.
pub fn fit_ridge(x: ArrayView2<'_, f64>, y: &[f64], w: &[f64], lambda: f64) -> Result<Regressor> {
    fit_ridge_with_intercept(x, y, w, lambda, true)
}

/// Solves `(X'WX + lambda I) beta = X'Wy`, where `X` gains a leading constant
/// column when `intercept` is set. The intercept is never penalized.
pub fn fit_ridge_with_intercept(
    x: ArrayView2<'_, f64>,
    y: &[f64],
    w: &[f64],
    lambda: f64,
    intercept: bool,
) -> Result<Regressor> {
    let n = x.nrows();
    check_len("y", n, y.len())?;
    check_len("w", n, w.len())?;
    if !(lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!("lambda {lambda} must be nonnegative")));
    }
    if w.iter().any(|&v| !(v >= 0.0)) {
        return Err(Error::InvalidArgument("weights must be nonnegative".into()));
    }
    if n == 0 || w.iter().sum::<f64>() <= 0.0 {
        return Err(Error::EmptyTrainingSet);
    }

    let offset = usize::from(intercept);
    let p = x.ncols() + offset;
    let mut gram = DMatrix::<f64>::zeros(p, p);
    let mut rhs = DVector::<f64>::zeros(p);
    let mut row = vec![0.0; p];
    for (i, xi) in x.rows().into_iter().enumerate() {
        if w[i] == 0.0 {
            continue;
        }
        if intercept {
            row[0] = 1.0;
        }
        for (slot, v) in row[offset..].iter_mut().zip(xi.iter()) {
            *slot = *v;
        }
        for a in 0..p {
            let wa = w[i] * row[a];
            rhs[a] += wa * y[i];
            for b in a..p {
                gram[(a, b)] += wa * row[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            gram[(a, b)] = gram[(b, a)];
        }
        if a >= offset {
            gram[(a, a)] += lambda;
        }
    }

    let beta = match gram.clone().cholesky() {
        Some(chol) => {
            if lambda == 0.0 {
                let l = chol.l_dirty();
                let degenerate = (0..p).any(|a| l[(a, a)] * l[(a, a)] <= 1e-12 * gram[(a, a)].max(f64::MIN_POSITIVE));
                if degenerate {
                    return Err(Error::RankDeficient);
                }
            }
            chol.solve(&rhs)
        }
        None => gram.lu().solve(&rhs).ok_or(Error::RankDeficient)?,
    };
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(Error::RankDeficient);
    }
    let (icpt, coef) = if intercept {
        (beta[0], beta.iter().skip(1).copied().collect())
    } else {
        (0.0, beta.iter().copied().collect())
    };
    Ok(Regressor::linear(LinearModel { intercept: icpt, coef }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use rand::Rng;

    fn objective(x: &Array2<f64>, y: &[f64], w: &[f64], lambda: f64, beta: &[f64]) -> f64 {
        let mut loss = 0.0;
        for (i, row) in x.rows().into_iter().enumerate() {
            let pred = beta[0] + row.iter().zip(&beta[1..]).map(|(a, b)| a * b).sum::<f64>();
            loss += w[i] * (y[i] - pred).powi(2);
        }
        loss + lambda * beta[1..].iter().map(|b| b * b).sum::<f64>()
    }

    #[test]
    fn identity_design_interpolates() {
        let x = Array2::<f64>::eye(4);
        let y = [1.0, -2.0, 3.5, 0.25];
        let f = fit_ridge_with_intercept(x.view(), &y, &[1.0; 4], 0.0, false).unwrap();
        let pred = f.predict(x.view());
        for (a, b) in pred.iter().zip(&y) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn heavy_penalty_shrinks_slopes() {
        let x = array![[1.0, 2.0], [3.0, -1.0], [0.5, 0.5], [2.0, 2.0]];
        let y = [1.0, 2.0, 3.0, 4.0];
        let f = fit_ridge(x.view(), &y, &[1.0; 4], 1e9).unwrap();
        let m = f.as_linear().unwrap();
        assert!(m.coef.iter().all(|c| c.abs() < 1e-6));
        assert!((m.intercept - 2.5).abs() < 1e-6);
    }

    #[test]
    fn singular_without_penalty_is_reported() {
        let x = array![[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]];
        let err = fit_ridge(x.view(), &[1.0, 2.0, 3.0], &[1.0; 3], 0.0).unwrap_err();
        assert!(matches!(err, Error::RankDeficient));
        assert!(fit_ridge(x.view(), &[1.0, 2.0, 3.0], &[1.0; 3], 1e-6).is_ok());
        assert!(matches!(
            fit_ridge(x.view(), &[1.0, 2.0, 3.0], &[0.0; 3], 1.0),
            Err(Error::EmptyTrainingSet)
        ));
    }

    #[test]
    fn normal_equations_and_grid_oracle() {
        let mut rng = crate::seed::rng(42);
        let x = Array2::from_shape_simple_fn((8, 3), || rng.random_range(-1.0..1.0));
        let y: Vec<f64> = (0..8).map(|_| rng.random_range(-2.0..2.0)).collect();
        let w: Vec<f64> = (0..8).map(|_| rng.random_range(0.2..2.0)).collect();
        let lambda = 0.3;
        let f = fit_ridge(x.view(), &y, &w, lambda).unwrap();
        let m = f.as_linear().unwrap();
        let beta: Vec<f64> = std::iter::once(m.intercept).chain(m.coef.iter().copied()).collect();

        // Residual of the normal equations, computed from scratch.
        let design = |i: usize, a: usize| if a == 0 { 1.0 } else { x[(i, a - 1)] };
        let mut worst: f64 = 0.0;
        for a in 0..4 {
            let mut lhs = if a > 0 { lambda * beta[a] } else { 0.0 };
            let mut rhs = 0.0;
            for i in 0..8 {
                let pred: f64 = (0..4).map(|b| design(i, b) * beta[b]).sum();
                lhs += w[i] * design(i, a) * pred;
                rhs += w[i] * design(i, a) * y[i];
            }
            worst = worst.max((lhs - rhs).abs());
        }
        assert!(worst < 1e-9, "normal-equation residual {worst}");

        // Coordinate-grid search refined down to a 1e-3 step.
        let mut best = vec![0.0; 4];
        let mut step = 1.0;
        while step >= 1e-3 {
            loop {
                let mut improved = false;
                for a in 0..4 {
                    let mut cand_best = objective(&x, &y, &w, lambda, &best);
                    for k in -10..=10 {
                        let mut cand = best.clone();
                        cand[a] += k as f64 * step;
                        let v = objective(&x, &y, &w, lambda, &cand);
                        if v < cand_best - 1e-15 {
                            cand_best = v;
                            best = cand;
                            improved = true;
                        }
                    }
                }
                if !improved {
                    break;
                }
            }
            step /= 10.0;
        }
        for (g, b) in best.iter().zip(&beta) {
            assert!((g - b).abs() < 5e-3, "grid {g} vs closed form {b}");
        }
        assert!(objective(&x, &y, &w, lambda, &beta) <= objective(&x, &y, &w, lambda, &best) + 1e-12);
    }

    #[test]
    fn duplicated_rows_with_split_weights_match() {
        let mut rng = crate::seed::rng(3);
        let x = Array2::from_shape_simple_fn((10, 2), || rng.random_range(-1.0..1.0));
        let y: Vec<f64> = (0..10).map(|_| rng.random_range(-1.0..1.0)).collect();
        let w: Vec<f64> = (0..10).map(|_| rng.random_range(0.5..1.5)).collect();
        let base = fit_ridge(x.view(), &y, &w, 0.1).unwrap();

        let mut rows: Vec<usize> = (0..10).collect();
        rows.push(4);
        let x2 = x.select(ndarray::Axis(0), &rows);
        let y2: Vec<f64> = rows.iter().map(|&i| y[i]).collect();
        let mut w2: Vec<f64> = rows.iter().map(|&i| w[i]).collect();
        w2[4] /= 2.0;
        w2[10] /= 2.0;
        let dup = fit_ridge(x2.view(), &y2, &w2, 0.1).unwrap();
        let (a, b) = (base.as_linear().unwrap(), dup.as_linear().unwrap());
        assert!((a.intercept - b.intercept).abs() < 1e-10);
        for (u, v) in a.coef.iter().zip(&b.coef) {
            assert!((u - v).abs() < 1e-10);
        }
    }
}
