// generate → explain (oracle) → evaluate through the command-line entry
// point. The oracle must score perfectly.

use tsdiff::cli;

fn tsdiff(args: &[&str]) -> anyhow::Result<()> {
    let code = cli::run(std::iter::once("tsdiff").chain(args.iter().copied()));
    anyhow::ensure!(code == 0, "tsdiff {} exited with {code}", args.join(" "));
    Ok(())
}

pub fn run_example() -> anyhow::Result<()> {
    let tmp = tempfile::tempdir()?;
    let dir = tmp.path();
    let data = dir.join("data");
    let pred = dir.join("oracle.jsonl");
    let report = dir.join("report");
    let s = |p: &std::path::Path| p.to_str().unwrap().to_string();

    tsdiff(&["generate", "--n", "50", "--kmax", "4", "--seed", "3", "--out", &s(&data)])?;
    tsdiff(&["explain", "--method", "oracle", "--in", &s(&data), "--out", &s(&pred)])?;
    tsdiff(&["evaluate", "--pred", &s(&pred), "--gt", &s(&data.join("manifest.jsonl")), "--out", &s(&report)])?;

    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(report.join("report.json"))?)?;
    anyhow::ensure!(json["match_acc_overall"] == 100.0 && json["opr"] == 0.0 && json["upr"] == 0.0);
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
