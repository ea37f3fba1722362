//! Runs a small benchmark with the ridge learner and prints the squared-error table.

use natex::bench::{emit_table, run_benchmark, BenchmarkConfig, TableFormat};
use natex::estimators::EstimatorKind;
use natex::learners::RegressorKind;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = BenchmarkConfig {
        estimators: EstimatorKind::ALL.to_vec(),
        runs: 10,
        subsample: Some(2000),
        ..BenchmarkConfig::default()
    }
    .with_learner_kind(RegressorKind::Ridge);
    let table = run_benchmark(&config)?;
    print!("{}", emit_table(&table, TableFormat::Markdown));
    for row in table.rows.iter().filter(|r| r.failures > 0) {
        println!("{}: {} failed runs", row.estimator, row.failures);
    }
    println!("config fingerprint {:016x}", table.provenance.config_fingerprint);
    Ok(())
}
