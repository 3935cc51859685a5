// Least-squares explanation of clean single-difference pairs.

use tsdiff::explain::{explain_lsq, ExplainConfig};
use tsdiff::funclib::{Category, LibraryConfig, Range};
use tsdiff::pairgen::{GenConfig, Generator};
use tsdiff::schema::record_text;

pub fn run_example() -> anyhow::Result<()> {
    let config = GenConfig {
        seed: 11,
        source: "piecewise:1".parse()?,
        categories: Some(vec![Category::Trend, Category::Periodic, Category::Event]),
        library: LibraryConfig {
            amplitude: Range::new(1.75, 1.75),
            ..LibraryConfig::default()
        },
        ..GenConfig::default()
    };
    let generator = Generator::new(config)?;
    let explainer = ExplainConfig::default();
    let n = 25;
    let mut hits = 0;
    for i in 0..n {
        let s = generator.sample(i)?;
        let out = explain_lsq(&s.pair.reference, &s.pair.target, &explainer)?;
        let truth = &s.pair.ground_truth[0];
        let hit = out.len() == 1 && out[0].func == truth.func;
        hits += hit as u32;
        if i < 5 || !hit {
            println!("truth {}", record_text(truth));
            for r in &out {
                println!("  got {}", record_text(r));
            }
        }
    }
    println!("func accuracy {hits}/{n}");
    anyhow::ensure!(hits * 10 >= n as u32 * 8, "too few functions recovered");
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
