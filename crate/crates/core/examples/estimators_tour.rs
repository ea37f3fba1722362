//! Runs every registered estimator once on one observed assignment.

use natex::dataset::{generate, observe, sample_treatment, GenerationConfig};
use natex::estimators::{estimate, EstimatorKind, EstimatorSettings};
use natex::learners::{fit_propensity, RegressorSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let full = generate(&GenerationConfig {
        n: 5000,
        seed: 1,
        ..GenerationConfig::default()
    })?;
    let z = sample_treatment(full.propensity(), 2);
    let obs = observe(&full, &z)?;
    let learner = RegressorSpec::ridge(1e-6);
    let p = fit_propensity(obs.covariates(), obs.z(), &learner, 3)?;
    let truth = full.true_ate();

    println!("{:<26} {:>10} {:>11} {:>9}", "estimator", "estimate", "sq. error", "time (s)");
    for kind in EstimatorKind::ALL {
        match estimate(kind, &obs, &p, &learner, &EstimatorSettings::default(), 4) {
            Ok(r) => println!(
                "{:<26} {:>10.5} {:>11.2e} {:>9.2e}",
                kind.name(),
                r.estimate,
                (r.estimate - truth).powi(2),
                r.elapsed
            ),
            Err(e) => println!("{:<26} failed: {e}", kind.name()),
        }
    }
    println!("true effect {truth:.5}");
    Ok(())
}
