// Nearest-neighbour retrieval over difference embeddings, compared against
// uniform guessing of the function.
//
// `cargo run --release --example retrieval_baseline -- [POOL_SIZE]`

use tsdiff::explain::{explain_retrieval, RetrievalPool};
use tsdiff::pairgen::{GenConfig, Generator};

pub fn run_example() -> anyhow::Result<()> {
    let pool_size = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3000);
    let pool = RetrievalPool::build(&Generator::new(GenConfig { seed: 100, ..GenConfig::default() })?, pool_size)?;
    let queries = Generator::new(GenConfig { seed: 200, ..GenConfig::default() })?;

    let tmp = tempfile::tempdir()?;
    let path = tmp.path().join("pool.jsonl");
    pool.save(&path)?;
    let pool = RetrievalPool::load(&path)?;

    let n = 200;
    let mut hits = 0;
    for i in 0..n {
        let s = queries.sample(i)?;
        let out = explain_retrieval(&s.pair.reference, &s.pair.target, &pool)?;
        hits += (out[0].func == s.pair.ground_truth[0].func) as u64;
    }
    println!(
        "pool {} entries, func accuracy {:.1}% (chance {:.1}%)",
        pool.len(),
        100.0 * hits as f64 / n as f64,
        100.0 / 28.0
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
