//! Regression engines and the propensity classifier.
//!
//! Two learners sit behind the [`Learner`] trait: a closed-form weighted ridge
//! (deterministic and cheap enough to refit under every counterfactual
//! assignment) and a small ReLU network trained by mini-batch Adam.

mod network;
mod propensity;
mod ridge;

use ndarray::{ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::Result;

pub use network::{fit_network, train_network, Mlp, TrainedNetwork};
pub use propensity::{fit_propensity, fit_propensity_raw};
pub use ridge::{fit_ridge, fit_ridge_with_intercept, LinearModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegressorKind {
    Ridge,
    Network,
}

impl std::str::FromStr for RegressorKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ridge" => Ok(Self::Ridge),
            "network" => Ok(Self::Network),
            other => Err(crate::Error::Config(format!("unknown learner kind `{other}`"))),
        }
    }
}

/// Learner configuration shared by outcome regressions and the propensity model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegressorSpec {
    pub kind: RegressorKind,
    pub ridge_lambda: f64,
    pub hidden_width: usize,
    /// Number of dense layers, output layer included.
    pub n_layers: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for RegressorSpec {
    fn default() -> Self {
        Self::network()
    }
}

impl RegressorSpec {
    /// Three dense layers of width 100, learning rate 0.001, 200 epochs.
    pub fn network() -> Self {
        Self {
            kind: RegressorKind::Network,
            ridge_lambda: 1e-6,
            hidden_width: 100,
            n_layers: 3,
            learning_rate: 1e-3,
            epochs: 200,
            batch_size: 128,
            seed: 0,
        }
    }

    pub fn ridge(lambda: f64) -> Self {
        Self {
            kind: RegressorKind::Ridge,
            ridge_lambda: lambda,
            ..Self::network()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(crate::Error::Config(m.to_owned()));
        if !(self.ridge_lambda >= 0.0) {
            return bad("ridge_lambda must be nonnegative");
        }
        if self.kind == RegressorKind::Network {
            if self.n_layers == 0 || self.hidden_width == 0 || self.batch_size == 0 {
                return bad("n_layers, hidden_width and batch_size must be positive");
            }
            if self.epochs == 0 {
                return bad("epochs must be positive");
            }
            if !(self.learning_rate > 0.0) {
                return bad("learning_rate must be positive");
            }
        }
        Ok(())
    }
}

/// Regression loss weighting for the treated and control fits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightScheme {
    /// `(1, 1)`
    Unit,
    /// `((1-p)/p, p/(1-p))`
    Single,
    /// `((1-p)/p^2, p/(1-p)^2)`
    Double,
}

impl WeightScheme {
    /// `(w1, w0)` for a row with propensity `p`.
    pub fn weights(self, p: f64) -> (f64, f64) {
        match self {
            WeightScheme::Unit => (1.0, 1.0),
            WeightScheme::Single => ((1.0 - p) / p, p / (1.0 - p)),
            WeightScheme::Double => ((1.0 - p) / (p * p), p / ((1.0 - p) * (1.0 - p))),
        }
    }

    pub fn treated_weight(self, p: f64) -> f64 {
        self.weights(p).0
    }

    pub fn control_weight(self, p: f64) -> f64 {
        self.weights(p).1
    }

    pub fn name(self) -> &'static str {
        match self {
            WeightScheme::Unit => "unit",
            WeightScheme::Single => "single",
            WeightScheme::Double => "double",
        }
    }
}

impl std::str::FromStr for WeightScheme {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unit" => Ok(Self::Unit),
            "single" => Ok(Self::Single),
            "double" => Ok(Self::Double),
            other => Err(crate::Error::InvalidArgument(format!("unknown weight scheme `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Model {
    Constant(f64),
    Linear(LinearModel),
    Network(Mlp),
}

/// A fitted, immutable prediction function over covariate rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Regressor {
    model: Model,
    spec: Option<RegressorSpec>,
    fingerprint: u64,
}

impl Regressor {
    pub fn constant(value: f64) -> Self {
        Self {
            model: Model::Constant(value),
            spec: None,
            fingerprint: 0,
        }
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn linear(model: LinearModel) -> Self {
        Self {
            model: Model::Linear(model),
            spec: None,
            fingerprint: 0,
        }
    }

    pub(crate) fn with_provenance(mut self, spec: Option<RegressorSpec>, fingerprint: u64) -> Self {
        self.spec = spec;
        self.fingerprint = fingerprint;
        self
    }

    pub fn predict_row(&self, x: ArrayView1<'_, f64>) -> f64 {
        match &self.model {
            Model::Constant(c) => *c,
            Model::Linear(m) => m.predict_row(x),
            Model::Network(net) => net.predict_row(x),
        }
    }

    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Vec<f64> {
        match &self.model {
            Model::Constant(c) => vec![*c; x.nrows()],
            Model::Linear(m) => x.rows().into_iter().map(|r| m.predict_row(r)).collect(),
            Model::Network(net) => net.predict(x),
        }
    }

    pub fn as_linear(&self) -> Option<&LinearModel> {
        match &self.model {
            Model::Linear(m) => Some(m),
            _ => None,
        }
    }

    pub fn spec(&self) -> Option<&RegressorSpec> {
        self.spec.as_ref()
    }

    /// Hash of the training data the model was fitted on (0 for hand-built models).
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }
}

/// Anything that can fit a weighted least-squares regression.
pub trait Learner: Sync {
    fn fit(&self, x: ArrayView2<'_, f64>, y: &[f64], w: &[f64], seed: u64) -> Result<Regressor>;
}

impl Learner for RegressorSpec {
    fn fit(&self, x: ArrayView2<'_, f64>, y: &[f64], w: &[f64], seed: u64) -> Result<Regressor> {
        let fitted = match self.kind {
            RegressorKind::Ridge => fit_ridge(x, y, w, self.ridge_lambda)?,
            RegressorKind::Network => fit_network(x, y, w, self, seed)?,
        };
        Ok(fitted.with_provenance(Some(self.clone()), fingerprint(x, y, w)))
    }
}

/// Always returns the zero function.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroLearner;

impl Learner for ZeroLearner {
    fn fit(&self, _x: ArrayView2<'_, f64>, _y: &[f64], _w: &[f64], _seed: u64) -> Result<Regressor> {
        Ok(Regressor::zero())
    }
}

/// FNV-1a over the bit patterns of the training data.
pub(crate) fn fingerprint(x: ArrayView2<'_, f64>, y: &[f64], w: &[f64]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |v: f64| {
        for b in v.to_bits().to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    };
    x.iter().chain(y).chain(w).for_each(|&v| eat(v));
    h
}
