// Record validation: canonical form, strict vs lenient parsing, and the
// violations reported for broken records.

use tsdiff::funclib::{FuncId, Interval};
use tsdiff::schema::{self, DifferenceRecord, ParseMode, Presence};

pub fn run_example() -> anyhow::Result<()> {
    let drop = DifferenceRecord::type1(FuncId::Drop, Interval::new(268, 268), Presence::Present);
    let text = schema::serialize(std::slice::from_ref(&drop))?;
    println!("canonical: {text}");
    anyhow::ensure!(schema::parse(&text, ParseMode::Strict)? == vec![drop]);

    let loose = r#"[{"func":"DROP","type":"TYPE1","end":268,"start":268,"presence":"PRESENT"}]"#;
    println!("strict on reordered keys: {}", schema::parse(loose, ParseMode::Strict).unwrap_err());
    println!("lenient canonicalizes to: {}", schema::canonicalize(loose, ParseMode::Lenient)?);

    let broken: serde_json::Value = serde_json::from_str(
        r#"[{"type":"TYPE1","func":"SIGMOID","start":90,"end":40,"presence":"ABSENT","param":"AMPLITUDE","magnitude":null},
            {"type":"TYPE2","func":"SPIKE","start":5,"end":5,"presence":null,"param":"FREQUENCY","magnitude":"LARGER"}]"#,
    )?;
    let inspection = schema::inspect_value(&broken, ParseMode::Strict, Some(300));
    for (i, violations) in &inspection.rejected {
        for v in violations {
            println!("record {i}: {v}");
        }
    }
    anyhow::ensure!(inspection.rejected.len() == 2);

    let doc = schema::json_schema();
    println!("schema document: {} ({} top-level keys)", doc["title"], doc.as_object().map_or(0, |o| o.len()));
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
