//! Feed-forward ReLU network trained by seeded mini-batch Adam.
//!
//! Inputs are standardized with the training-set column moments and
//! regression targets with their weighted moments; both transforms are stored
//! in the fitted [`Mlp`] so predictions come back in the original units.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;

use super::{Regressor, RegressorKind, RegressorSpec};
use crate::error::{check_len, Error, Result};
use crate::seed;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Head {
    /// Weighted squared error on the standardized target.
    Regression,
    /// Sigmoid output with binary cross entropy.
    Logistic,
}

#[derive(Debug, Clone, PartialEq)]
struct Dense {
    w: Array2<f64>,
    b: Array1<f64>,
}

/// A fitted network.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Dense>,
    head: Head,
    x_mean: Array1<f64>,
    x_scale: Array1<f64>,
    y_mean: f64,
    y_scale: f64,
}

impl Mlp {
    fn standardize(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        (&x - &self.x_mean) / &self.x_scale
    }

    /// Raw output of the last layer for standardized inputs.
    fn raw(&self, input: &Array2<f64>) -> Array1<f64> {
        let mut a = input.clone();
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            a = a.dot(&layer.w) + &layer.b;
            if l < last {
                a.mapv_inplace(|v| v.max(0.0));
            }
        }
        a.column(0).to_owned()
    }

    fn finish(&self, raw: f64) -> f64 {
        match self.head {
            Head::Regression => self.y_mean + self.y_scale * raw,
            Head::Logistic => crate::dataset::logistic(raw),
        }
    }

    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Vec<f64> {
        let mut out = Vec::with_capacity(x.nrows());
        for chunk in x.axis_chunks_iter(Axis(0), 1024) {
            let raw = self.raw(&self.standardize(chunk));
            out.extend(raw.iter().map(|&r| self.finish(r)));
        }
        out
    }

    pub fn predict_row(&self, x: ArrayView1<'_, f64>) -> f64 {
        let row = x.insert_axis(Axis(0));
        self.predict(row)[0]
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }
}

/// A fitted network plus its full-data training loss before and after training.
#[derive(Debug, Clone)]
pub struct TrainedNetwork {
    pub model: Mlp,
    pub initial_loss: f64,
    pub final_loss: f64,
}

/// Minimizes `sum_i w_i (y_i - f(x_i))^2` with Adam on mini-batches.
pub fn fit_network(x: ArrayView2<'_, f64>, y: &[f64], w: &[f64], spec: &RegressorSpec, seed: u64) -> Result<Regressor> {
    let trained = train_network(x, y, w, spec, seed)?;
    Ok(Regressor {
        model: super::Model::Network(trained.model),
        spec: None,
        fingerprint: 0,
    })
}

pub fn train_network(
    x: ArrayView2<'_, f64>,
    y: &[f64],
    w: &[f64],
    spec: &RegressorSpec,
    seed: u64,
) -> Result<TrainedNetwork> {
    if spec.kind != RegressorKind::Network {
        return Err(Error::InvalidArgument("fit_network requires a network spec".into()));
    }
    spec.validate()?;
    train(x, y, w, spec, seed, Head::Regression)
}

pub(crate) fn train(
    x: ArrayView2<'_, f64>,
    y: &[f64],
    w: &[f64],
    spec: &RegressorSpec,
    seed: u64,
    head: Head,
) -> Result<TrainedNetwork> {
    train_with(x, y, w, spec, seed, head, &mut |_, _| true)
}

/// Like [`train`], calling `on_epoch(epoch, model)` after every epoch; training
/// stops early when it returns `false`.
pub(crate) fn train_with(
    x: ArrayView2<'_, f64>,
    y: &[f64],
    w: &[f64],
    spec: &RegressorSpec,
    seed: u64,
    head: Head,
    on_epoch: &mut dyn FnMut(usize, &Mlp) -> bool,
) -> Result<TrainedNetwork> {
    let n = x.nrows();
    check_len("y", n, y.len())?;
    check_len("w", n, w.len())?;
    if w.iter().any(|&v| !(v >= 0.0)) {
        return Err(Error::InvalidArgument("weights must be nonnegative".into()));
    }
    let w_sum: f64 = w.iter().sum();
    if n == 0 || w_sum <= 0.0 {
        return Err(Error::EmptyTrainingSet);
    }
    let d = x.ncols();
    let mut rng = seed::rng(seed);

    let x_mean = x.mean_axis(Axis(0)).expect("n > 0");
    let x_scale = x
        .var_axis(Axis(0), 0.0)
        .mapv(|v| if v.sqrt() > 1e-12 { v.sqrt() } else { 1.0 });
    let (y_mean, y_scale) = match head {
        Head::Regression => {
            let m = w.iter().zip(y).map(|(wi, yi)| if *wi == 0.0 { 0.0 } else { wi * yi }).sum::<f64>() / w_sum;
            let v = w
                .iter()
                .zip(y)
                .map(|(wi, yi)| if *wi == 0.0 { 0.0 } else { wi * (yi - m) * (yi - m) })
                .sum::<f64>()
                / w_sum;
            (m, if v.sqrt() > 1e-12 { v.sqrt() } else { 1.0 })
        }
        Head::Logistic => (0.0, 1.0),
    };
    let w_mean = w_sum / n as f64;
    let weights: Vec<f64> = w.iter().map(|v| v / w_mean).collect();
    let target: Vec<f64> = y
        .iter()
        .zip(w)
        .map(|(yi, wi)| if *wi == 0.0 { 0.0 } else { (yi - y_mean) / y_scale })
        .collect();

    let mut dims = vec![d];
    dims.extend(std::iter::repeat_n(spec.hidden_width, spec.n_layers - 1));
    dims.push(1);
    let layers: Vec<Dense> = dims
        .windows(2)
        .map(|pair| {
            let bound = 1.0 / (pair[0].max(1) as f64).sqrt();
            let w = Array2::from_shape_simple_fn((pair[0], pair[1]), || rng.random_range(-bound..=bound));
            let b = Array1::from_shape_simple_fn(pair[1], || rng.random_range(-bound..=bound));
            Dense { w, b }
        })
        .collect();
    let mut model = Mlp {
        layers,
        head,
        x_mean,
        x_scale,
        y_mean,
        y_scale,
    };

    let inputs = model.standardize(x);
    let full_loss = |m: &Mlp| -> f64 {
        let pred = m.predict(x);
        let total: f64 = pred
            .iter()
            .zip(y)
            .zip(w)
            .filter(|(_, wi)| **wi > 0.0)
            .map(|((f, yi), wi)| wi * pointwise_loss(head, *f, *yi))
            .sum();
        total / w_sum
    };
    let initial_loss = full_loss(&model);

    let mut adam_m: Vec<(Array2<f64>, Array1<f64>)> = model
        .layers
        .iter()
        .map(|l| (Array2::zeros(l.w.raw_dim()), Array1::zeros(l.b.len())))
        .collect();
    let mut adam_v = adam_m.clone();
    let mut step: i32 = 0;
    let mut order: Vec<usize> = (0..n).collect();
    let batch = spec.batch_size.min(n);
    let last = model.layers.len() - 1;

    for epoch in 1..=spec.epochs {
        order.shuffle(&mut rng);
        for idx in order.chunks(batch) {
            let xb = inputs.select(Axis(0), idx);
            let bsz = idx.len() as f64;

            // Forward, keeping pre-activations for the ReLU masks.
            let mut acts = Vec::with_capacity(model.layers.len() + 1);
            acts.push(xb);
            let mut pre = Vec::with_capacity(model.layers.len());
            for (l, layer) in model.layers.iter().enumerate() {
                let z = acts[l].dot(&layer.w) + &layer.b;
                let a = if l < last { z.mapv(|v| v.max(0.0)) } else { z.clone() };
                pre.push(z);
                acts.push(a);
            }

            let out = acts[last + 1].column(0);
            let mut grad = Array2::<f64>::zeros((idx.len(), 1));
            for (k, &i) in idx.iter().enumerate() {
                let wi = weights[i];
                grad[(k, 0)] = if wi == 0.0 {
                    0.0
                } else {
                    match head {
                        Head::Regression => 2.0 * wi * (out[k] - target[i]) / bsz,
                        Head::Logistic => wi * (crate::dataset::logistic(out[k]) - y[i]) / bsz,
                    }
                };
            }

            step += 1;
            let bias1 = 1.0 - ADAM_BETA1.powi(step);
            let bias2 = 1.0 - ADAM_BETA2.powi(step);
            let lr = spec.learning_rate;
            for l in (0..=last).rev() {
                let gw = acts[l].t().dot(&grad);
                let gb = grad.sum_axis(Axis(0));
                if l > 0 {
                    let mut next = grad.dot(&model.layers[l].w.t());
                    ndarray::Zip::from(&mut next).and(&pre[l - 1]).for_each(|g, &z| {
                        if z <= 0.0 {
                            *g = 0.0;
                        }
                    });
                    grad = next;
                }
                let (mw, mb) = &mut adam_m[l];
                let (vw, vb) = &mut adam_v[l];
                let layer = &mut model.layers[l];
                ndarray::Zip::from(&mut layer.w).and(mw).and(vw).and(&gw).for_each(|p, m, v, &g| {
                    *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                    *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                    *p -= lr * (*m / bias1) / ((*v / bias2).sqrt() + ADAM_EPS);
                });
                ndarray::Zip::from(&mut layer.b).and(mb).and(vb).and(&gb).for_each(|p, m, v, &g| {
                    *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                    *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                    *p -= lr * (*m / bias1) / ((*v / bias2).sqrt() + ADAM_EPS);
                });
            }
        }
        if !on_epoch(epoch, &model) {
            break;
        }
    }

    let final_loss = full_loss(&model);
    Ok(TrainedNetwork {
        model,
        initial_loss,
        final_loss,
    })
}

fn pointwise_loss(head: Head, pred: f64, y: f64) -> f64 {
    match head {
        Head::Regression => (y - pred).powi(2),
        Head::Logistic => {
            let p = pred.clamp(1e-12, 1.0 - 1e-12);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        }
    }
}
