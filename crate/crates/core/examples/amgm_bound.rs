//! Checks the AM-GM upper bound on the first variance term and the identity
//! behind the double weights.

use natex::dataset::{generate, GenerationConfig};
use natex::estimators::SplitPartition;
use natex::learners::{LinearModel, Regressor};
use natex::variance::{amgm_bound_check, double_weight_expectation_identity, FixedFunctionPair};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let full = generate(&GenerationConfig {
        n: 200,
        d: 3,
        seed: 21,
        ..GenerationConfig::default()
    })?;
    let fixed = FixedFunctionPair {
        f1: Regressor::linear(LinearModel {
            intercept: 0.6,
            coef: vec![0.1, -0.2, 0.05],
        }),
        f0: Regressor::linear(LinearModel {
            intercept: 0.5,
            coef: vec![-0.1, 0.0, 0.1],
        }),
    };
    let check = amgm_bound_check(&full, &fixed, &SplitPartition::random(full.len(), 22))?;
    println!("first term {:.4e} <= bound {:.4e}: {}", check.term1, check.bound, check.holds);

    let (expected, closed_form) = double_weight_expectation_identity(&full, &fixed);
    println!("expected double-weighted loss {expected:.6e}, single-weighted closed form {closed_form:.6e}");
    Ok(())
}
