//! Fixtures shared by the integration tests and the acceptance runner.
#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::Rng;
use serde_json::Value;
use tsdiff::funclib::{FuncId, Interval, Param};
use tsdiff::schema::{DiffType, DifferenceRecord, ExplanationList, Magnitude, Presence};

pub type Dataset = BTreeMap<String, ExplanationList>;

pub fn t1(func: FuncId, start: usize, end: usize) -> DifferenceRecord {
    DifferenceRecord::type1(func, Interval::new(start, end), Presence::Present)
}

pub fn t2(func: FuncId, start: usize, end: usize, param: Param, magnitude: Magnitude) -> DifferenceRecord {
    DifferenceRecord::type2(func, Interval::new(start, end), param, magnitude)
}

fn ids(n: usize) -> impl Iterator<Item = String> {
    (0..n).map(|i| format!("s{i:02}"))
}

/// Ten samples, twelve ground-truth elements; one prediction and two
/// ground-truth elements are left without a partner.
pub fn opr_upr_fixture() -> (Dataset, Dataset) {
    let mut gt = Dataset::new();
    let mut pred = Dataset::new();
    let singles = [
        t1(FuncId::Spike, 10, 10),
        t2(FuncId::Sigmoid, 30, 200, Param::Amplitude, Magnitude::Larger),
        t1(FuncId::GaussianNoise, 50, 150),
        t2(FuncId::Sawtooth, 20, 220, Param::Frequency, Magnitude::Smaller),
        t1(FuncId::PositiveStep, 100, 110),
        t1(FuncId::LogIncrease, 0, 120),
        t2(FuncId::SquareWave, 60, 260, Param::Amplitude, Magnitude::Larger),
        t1(FuncId::Drop, 268, 268),
    ];
    let mut names = ids(10);
    for r in singles {
        let id = names.next().unwrap();
        gt.insert(id.clone(), vec![r.clone()]);
        pred.insert(id, vec![r]);
    }
    // trend found, the event missed
    let a = t2(FuncId::QuadraticIncrease, 35, 240, Param::Amplitude, Magnitude::Larger);
    let id = names.next().unwrap();
    gt.insert(id.clone(), vec![a.clone(), t1(FuncId::Drop, 268, 268)]);
    pred.insert(id, vec![a]);
    // periodic found, the event missed, a spurious fluctuation reported
    let c = t2(FuncId::TriangleWave, 36, 237, Param::Frequency, Magnitude::Larger);
    let id = names.next().unwrap();
    gt.insert(id.clone(), vec![c.clone(), t1(FuncId::NegativePulse, 250, 260)]);
    pred.insert(id, vec![c, t1(FuncId::LaplaceNoise, 10, 90)]);
    (pred, gt)
}

/// Four perfectly aligned pairs; the function is wrong in one of them.
pub fn func_accuracy_fixture() -> (Dataset, Dataset) {
    let gt_records = [
        t1(FuncId::LinearIncrease, 10, 100),
        t1(FuncId::Sinusoidal, 20, 200),
        t1(FuncId::Spike, 5, 5),
        t1(FuncId::GaussianNoise, 40, 140),
    ];
    let mut pred_records = gt_records.clone();
    pred_records[0].func = FuncId::QuadraticIncrease;
    let gt = ids(4).zip(gt_records.into_iter().map(|r| vec![r])).collect();
    let pred = ids(4).zip(pred_records.into_iter().map(|r| vec![r])).collect();
    (pred, gt)
}

/// A record that satisfies every schema rule for a series of `length`.
pub fn random_record<R: Rng + ?Sized>(rng: &mut R, length: usize) -> DifferenceRecord {
    let func = FuncId::ALL[rng.random_range(0..FuncId::ALL.len())];
    let start = rng.random_range(0..length);
    let end = rng.random_range(start..length);
    let interval = Interval::new(start, end);
    if rng.random_bool(0.5) {
        let presence = if rng.random_bool(0.5) { Presence::Present } else { Presence::Absent };
        DifferenceRecord::type1(func, interval, presence)
    } else {
        let params = func.modifiable();
        let param = params[rng.random_range(0..params.len())];
        let magnitude = if rng.random_bool(0.5) { Magnitude::Larger } else { Magnitude::Smaller };
        DifferenceRecord::type2(func, interval, param, magnitude)
    }
}

/// The six nullability rules, each broken on its own. Returns the mutated
/// JSON record, or `None` when the rule does not apply to this record type.
pub fn mutate(record: &DifferenceRecord, rule: usize) -> Option<Value> {
    let mut v: Value = serde_json::from_str(&tsdiff::schema::record_text(record)).unwrap();
    let o = v.as_object_mut().unwrap();
    let type1 = record.diff_type == DiffType::Type1;
    match (rule, type1) {
        (0, true) => o["presence"] = Value::Null,
        (1, true) => o["param"] = "AMPLITUDE".into(),
        (2, true) => o["magnitude"] = "LARGER".into(),
        (3, false) => o["presence"] = "PRESENT".into(),
        (4, false) => o["param"] = Value::Null,
        (5, false) => o["magnitude"] = Value::Null,
        _ => return None,
    }
    Some(v)
}

pub const MUTATION_RULES: usize = 6;

/// Any valid record of the type the rule applies to.
pub fn record_for_rule(rule: usize) -> DifferenceRecord {
    if rule < 3 {
        t1(FuncId::Sigmoid, 40, 90)
    } else {
        t2(FuncId::Sinusoidal, 40, 90, Param::Frequency, Magnitude::Smaller)
    }
}

/// Predictions-shaped JSON lines for a dataset.
pub fn dataset_text(data: &Dataset) -> String {
    let entries: Vec<_> = data.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
    tsdiff::evaluator::predictions_text(&entries).unwrap()
}
