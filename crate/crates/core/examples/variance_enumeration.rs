//! Compares the closed-form variance of the split estimator with exact
//! enumeration over all assignments, then with a sampled estimate.

use natex::dataset::{generate, GenerationConfig};
use natex::estimators::SplitPartition;
use natex::learners::WeightScheme;
use natex::variance::{term2_sampled, split_variance_terms, RidgeHalf, VarianceReport};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n = 10;
    let full = generate(&GenerationConfig {
        n,
        d: 2,
        seed: 5,
        ..GenerationConfig::default()
    })?;
    let split = SplitPartition::random(n, 6);

    println!("scheme,{}", VarianceReport::CSV_HEADER);
    for scheme in [WeightScheme::Unit, WeightScheme::Single, WeightScheme::Double] {
        let report = split_variance_terms(&full, &split, scheme, 1e-6)?;
        println!("{},{}", scheme.name(), report.to_csv_row());
    }

    let model = RidgeHalf {
        scheme: WeightScheme::Double,
        lambda: 1e-6,
    };
    let sampled = term2_sampled(&full, &split, &model, 2000, 7)?;
    println!(
        "sampled (double): term1 {:.4e} +- {:.1e}, term2 {:.4e} +- {:.1e} from {} draws",
        sampled.term1, sampled.term1_stderr, sampled.term2, sampled.term2_stderr, sampled.pairs
    );
    Ok(())
}
