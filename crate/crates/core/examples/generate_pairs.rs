// Generate a small dataset, check that every target is the reference plus
// the signed components of its differences, and write it to disk.
//
// `cargo run --example generate_pairs -- [OUT_DIR]`

use tsdiff::pairgen::{write_dataset, GenConfig, Generator, WriteOptions};
use tsdiff::schema;

pub fn run_example() -> anyhow::Result<()> {
    let config = GenConfig {
        k_min: 1,
        k_max: 3,
        seed: 7,
        ..GenConfig::default()
    };
    let generator = Generator::new(config)?;
    let samples = generator.generate(20, true)?;

    let mut worst = 0.0f64;
    for s in &samples {
        let mut rebuilt = s.pair.reference.clone();
        for d in &s.pair.internal {
            rebuilt.add_assign(&d.signed_component(generator.catalog())?);
        }
        for (a, b) in rebuilt.values().iter().zip(s.pair.target.values()) {
            worst = worst.max((a - b).abs());
        }
    }
    anyhow::ensure!(worst < 1e-9, "reconstruction error {worst}");

    let first = &samples[0];
    println!("sample {} ({} differences):", first.id, first.pair.ground_truth.len());
    println!("{}", schema::serialize(&first.pair.ground_truth)?);
    println!("max reconstruction error over {} pairs: {worst:.2e}", samples.len());

    let tmp = tempfile::tempdir()?;
    let out = std::env::args().nth(1).map(Into::into).unwrap_or_else(|| tmp.path().join("pairs"));
    let manifest = write_dataset(&samples, &out, WriteOptions { csv_sidecar: true, plot: true })?;
    println!("manifest: {} (config hash {})", manifest.display(), generator.config_hash());
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
