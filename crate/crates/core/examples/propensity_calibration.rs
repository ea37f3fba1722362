//! Fits propensities with the network classifier and prints a calibration curve.

use natex::dataset::{generate, sample_treatment, GenerationConfig};
use natex::learners::{fit_propensity, RegressorSpec};
use natex::metrics::{binary_cross_entropy, calibration_curve};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let full = generate(&GenerationConfig {
        n: 5000,
        seed: 11,
        ..GenerationConfig::default()
    })?;
    let z = sample_treatment(full.propensity(), 12);
    let p_est = fit_propensity(full.covariates(), &z, &RegressorSpec::network(), 13)?;
    println!(
        "cross entropy: true {:.3}, estimated {:.3}",
        binary_cross_entropy(full.propensity(), &z)?,
        binary_cross_entropy(&p_est, &z)?
    );
    print!("{}", calibration_curve(&p_est, &z, 10)?.to_csv());
    Ok(())
}
