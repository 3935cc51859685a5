// Score the two worked ground-truth / generated pairs: IoU per element and
// the aggregate report.

use std::collections::BTreeMap;

use tsdiff::evaluator::{align, evaluate_dataset, interval_iou};
use tsdiff::schema::{self, ParseMode};

// Keys quoted, nullable fields omitted as in the printed table, hence the
// lenient parse.
const ROW1_TRUTH: &str = r#"[{"type":"TYPE2","func":"TRIANGLE_WAVE","start":36,"end":237,"param":"FREQUENCY","magnitude":"LARGER"}]"#;
const ROW1_GEN: &str = r#"[{"type":"TYPE2","func":"TRIANGLE_WAVE","start":47,"end":237,"param":"FREQUENCY","magnitude":"LARGER"}]"#;
const ROW2_TRUTH: &str = r#"[{"type":"TYPE2","func":"QUADRATIC_INCREASE","start":35,"end":240,"param":"AMPLITUDE","magnitude":"LARGER"},
  {"type":"TYPE1","func":"DROP","start":268,"end":268,"presence":"PRESENT"}]"#;
const ROW2_GEN: &str = r#"[{"type":"TYPE2","func":"QUADRATIC_INCREASE","start":40,"end":240,"param":"AMPLITUDE","magnitude":"LARGER"},
  {"type":"TYPE1","func":"DROP","start":268,"end":268,"presence":"PRESENT"}]"#;

pub fn run_example() -> anyhow::Result<()> {
    let mut gt = BTreeMap::new();
    let mut pred = BTreeMap::new();
    for (id, truth, generated) in [("row1", ROW1_TRUTH, ROW1_GEN), ("row2", ROW2_TRUTH, ROW2_GEN)] {
        let t = schema::parse(truth, ParseMode::Lenient)?;
        let g = schema::parse(generated, ParseMode::Lenient)?;
        let al = align(&g, &t);
        for &(p, q) in &al.matches {
            let iou = interval_iou(g[p].interval(), t[q].interval());
            println!("{id}: {} [{}, {}] vs [{}, {}] IoU {iou:.6}", t[q].func, g[p].start, g[p].end, t[q].start, t[q].end);
        }
        gt.insert(id.to_string(), t);
        pred.insert(id.to_string(), g);
    }
    let report = evaluate_dataset(&pred, &gt)?;
    print!("{}", report.to_table());
    anyhow::ensure!(report.match_acc_overall == Some(100.0));
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
