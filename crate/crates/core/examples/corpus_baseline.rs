// Draw reference series from a directory of CSV files instead of a
// synthetic source.

use std::fmt::Write as _;

use tsdiff::pairgen::{GenConfig, Generator};

pub fn run_example() -> anyhow::Result<()> {
    let tmp = tempfile::tempdir()?;
    for k in 0..3 {
        let mut csv = String::from("value\n");
        for t in 0..500 {
            let x = t as f64 / 40.0;
            writeln!(csv, "{}", 10.0 + (k + 1) as f64 * x.sin() + 0.01 * t as f64)?;
        }
        std::fs::write(tmp.path().join(format!("sensor{k}.csv")), csv)?;
    }
    let config = GenConfig {
        seed: 5,
        source: format!("corpus:{}", tmp.path().display()).parse()?,
        ..GenConfig::default()
    };
    let generator = Generator::new(config)?;
    for s in generator.generate(3, false)? {
        let r = s.pair.reference.values();
        let mean = r.iter().sum::<f64>() / r.len() as f64;
        println!("{} source={} len={} mean={mean:+.3}", s.id, s.provenance.source, r.len());
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
