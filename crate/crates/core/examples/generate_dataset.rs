//! Generates a semi-synthetic dataset, prints its attributes and writes it as CSV.

use natex::dataset::{generate, load_full_csv, sample_treatment, save_full_csv, GenerationConfig};
use natex::metrics::{dataset_attributes, DatasetAttributes};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = GenerationConfig {
        n: 10_000,
        seed: 42,
        ..GenerationConfig::default()
    };
    let full = generate(&config)?;
    let z = sample_treatment(full.propensity(), 7);
    let attrs = dataset_attributes(&full, &z, full.dim())?;
    println!("{}", DatasetAttributes::CSV_HEADER);
    println!("{}", attrs.to_csv_row());
    println!("true average treatment effect: {:.5}", full.true_ate());

    let path = std::env::temp_dir().join("natex_generated.csv");
    save_full_csv(&full, &path)?;
    let back = load_full_csv(&path)?;
    println!("wrote {} rows to {} and read {} back", full.len(), path.display(), back.len());
    Ok(())
}
