//! Squared-error series by sample size, outcome correlation and propensity accuracy.

use natex::bench::{emit_sweep, sweep_by_correlation, sweep_by_entropy, sweep_by_n, BenchmarkConfig};
use natex::estimators::EstimatorKind;
use natex::learners::RegressorKind;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = BenchmarkConfig {
        estimators: vec![
            EstimatorKind::DirectDifference,
            EstimatorKind::HorvitzThompson,
            EstimatorKind::DoublyRobust,
            EstimatorKind::DoubleDouble,
        ],
        runs: 5,
        subsample: Some(2000),
        ..BenchmarkConfig::default()
    }
    .with_learner_kind(RegressorKind::Ridge);

    let by_n = sweep_by_n(&config, &[500, 1000, 2000, 4000])?;
    let by_corr = sweep_by_correlation(&config, &[0.0, 0.1, 0.4])?;
    let by_entropy = sweep_by_entropy(&config, &[0.0, 1.0, 2.0, 3.0])?;
    for sweep in [by_n, by_corr, by_entropy] {
        println!("# axis: {}", sweep.axis_name);
        print!("{}", emit_sweep(&sweep));
    }
    Ok(())
}
