//! Scoring predicted explanations against ground truth.
//!
//! Elements are aligned per sample (greedy same-category matching by
//! descending IoU, with a positional fallback when that finds nothing),
//! then field accuracies, interval IoU, gated match accuracy and the
//! over/under-prediction rates are pooled over the dataset.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::funclib::{Category, Interval};
use crate::schema::{self, DiffType, DifferenceRecord, ExplanationList, ParseMode};

/// Minimum IoU for a matched pair to count as a hit.
pub const IOU_GATE: f64 = 0.8;

/// Intersection over union of two closed sample intervals, measured on
/// their endpoints. Two identical single points score 1.
pub fn interval_iou(a: Interval, b: Interval) -> f64 {
    if a == b {
        return 1.0;
    }
    let inter = a.end.min(b.end) as f64 - a.start.max(b.start) as f64;
    let union = a.end.max(b.end) as f64 - a.start.min(b.start) as f64;
    if union <= 0.0 {
        return 0.0;
    }
    (inter.max(0.0) / union).clamp(0.0, 1.0)
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Alignment {
    /// `(pred index, gt index)`, ordered by gt index.
    pub matches: Vec<(usize, usize)>,
    pub unmatched_pred: Vec<usize>,
    pub unmatched_gt: Vec<usize>,
    /// Whether the positional fallback produced the matches.
    pub positional: bool,
}

/// Aligns predicted with ground-truth elements.
pub fn align(pred: &[DifferenceRecord], gt: &[DifferenceRecord]) -> Alignment {
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for (g, gr) in gt.iter().enumerate() {
        for (p, pr) in pred.iter().enumerate() {
            if gr.category() == pr.category() {
                candidates.push((interval_iou(pr.interval(), gr.interval()), g, p));
            }
        }
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_pred = vec![false; pred.len()];
    let mut used_gt = vec![false; gt.len()];
    let mut matches = Vec::new();
    for (_, g, p) in candidates {
        if !used_gt[g] && !used_pred[p] {
            used_gt[g] = true;
            used_pred[p] = true;
            matches.push((p, g));
        }
    }
    let positional = matches.is_empty() && !pred.is_empty() && !gt.is_empty();
    if positional {
        for i in 0..pred.len().min(gt.len()) {
            used_gt[i] = true;
            used_pred[i] = true;
            matches.push((i, i));
        }
    }
    matches.sort_by_key(|&(p, g)| (g, p));
    Alignment {
        matches,
        unmatched_pred: (0..pred.len()).filter(|&i| !used_pred[i]).collect(),
        unmatched_gt: (0..gt.len()).filter(|&i| !used_gt[i]).collect(),
        positional,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    Type,
    Func,
    Presence,
    Param,
    Magnitude,
}

impl Field {
    pub const ALL: [Field; 5] = [Field::Type, Field::Func, Field::Presence, Field::Param, Field::Magnitude];

    pub fn as_str(self) -> &'static str {
        match self {
            Field::Type => "type",
            Field::Func => "func",
            Field::Presence => "presence",
            Field::Param => "param",
            Field::Magnitude => "magnitude",
        }
    }

    /// Whether this field is scored for a pair with ground truth `gt`.
    pub fn eligible(self, gt: &DifferenceRecord) -> bool {
        match self {
            Field::Type | Field::Func => true,
            Field::Presence => gt.diff_type == DiffType::Type1,
            Field::Param | Field::Magnitude => gt.diff_type == DiffType::Type2,
        }
    }

    pub fn correct(self, pred: &DifferenceRecord, gt: &DifferenceRecord) -> bool {
        match self {
            Field::Type => pred.diff_type == gt.diff_type,
            Field::Func => pred.func == gt.func,
            Field::Presence => pred.presence == gt.presence,
            Field::Param => pred.param == gt.param,
            Field::Magnitude => pred.magnitude == gt.magnitude,
        }
    }
}

fn percent(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| 100.0 * num as f64 / den as f64)
}

/// Pooled counts; merging is plain addition, so per-sample tallies can be
/// computed in any order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Tally {
    pub field_correct: [usize; 5],
    pub field_eligible: [usize; 5],
    pub iou_sum: f64,
    pub matched: usize,
    pub hits: usize,
    pub category_hits: [usize; 4],
    pub category_matched: [usize; 4],
    pub n_gt: usize,
    pub n_pred: usize,
    pub unmatched_pred: usize,
    pub unmatched_gt: usize,
}

impl Tally {
    pub fn of(pred: &[DifferenceRecord], gt: &[DifferenceRecord], al: &Alignment, gate: f64) -> Tally {
        let mut t = Tally {
            n_gt: gt.len(),
            n_pred: pred.len(),
            unmatched_pred: al.unmatched_pred.len(),
            unmatched_gt: al.unmatched_gt.len(),
            ..Tally::default()
        };
        for &(p, g) in &al.matches {
            let (p, g) = (&pred[p], &gt[g]);
            let iou = interval_iou(p.interval(), g.interval());
            let mut all_fields = true;
            for (k, f) in Field::ALL.into_iter().enumerate() {
                if f.eligible(g) {
                    t.field_eligible[k] += 1;
                    if f.correct(p, g) {
                        t.field_correct[k] += 1;
                    } else {
                        all_fields = false;
                    }
                }
            }
            let c = g.category() as usize;
            t.iou_sum += iou;
            t.matched += 1;
            t.category_matched[c] += 1;
            if all_fields && iou >= gate {
                t.hits += 1;
                t.category_hits[c] += 1;
            }
        }
        t
    }

    pub fn merge(mut self, o: &Tally) -> Tally {
        for k in 0..5 {
            self.field_correct[k] += o.field_correct[k];
            self.field_eligible[k] += o.field_eligible[k];
        }
        for c in 0..4 {
            self.category_hits[c] += o.category_hits[c];
            self.category_matched[c] += o.category_matched[c];
        }
        self.iou_sum += o.iou_sum;
        self.matched += o.matched;
        self.hits += o.hits;
        self.n_gt += o.n_gt;
        self.n_pred += o.n_pred;
        self.unmatched_pred += o.unmatched_pred;
        self.unmatched_gt += o.unmatched_gt;
        self
    }
}

/// Accuracy of each field over its eligible matched pairs; fields without
/// eligible pairs are absent.
pub fn field_accuracies(al: &Alignment, pred: &[DifferenceRecord], gt: &[DifferenceRecord]) -> BTreeMap<Field, f64> {
    let t = Tally::of(pred, gt, al, IOU_GATE);
    Field::ALL
        .into_iter()
        .enumerate()
        .filter_map(|(k, f)| percent(t.field_correct[k], t.field_eligible[k]).map(|v| (f, v)))
        .collect()
}

/// Share of matched pairs with every eligible field correct and IoU at
/// least `gate`, overall and by ground-truth category (categories without
/// matched pairs are absent).
pub fn match_accuracy(
    al: &Alignment,
    pred: &[DifferenceRecord],
    gt: &[DifferenceRecord],
    gate: f64,
) -> (Option<f64>, BTreeMap<Category, f64>) {
    let t = Tally::of(pred, gt, al, gate);
    let by = Category::ALL
        .into_iter()
        .filter_map(|c| percent(t.category_hits[c as usize], t.category_matched[c as usize]).map(|v| (c, v)))
        .collect();
    (percent(t.hits, t.matched), by)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FieldAccuracy {
    #[serde(rename = "type")]
    pub diff_type: Option<f64>,
    pub func: Option<f64>,
    pub presence: Option<f64>,
    pub param: Option<f64>,
    pub magnitude: Option<f64>,
}

impl FieldAccuracy {
    pub fn get(&self, f: Field) -> Option<f64> {
        match f {
            Field::Type => self.diff_type,
            Field::Func => self.func,
            Field::Presence => self.presence,
            Field::Param => self.param,
            Field::Magnitude => self.magnitude,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Counts {
    pub samples: usize,
    pub n_gt: usize,
    pub n_pred: usize,
    pub n_matched: usize,
    pub unmatched_pred: usize,
    pub unmatched_gt: usize,
}

/// Dataset-level metrics, all in percent. `None` marks a metric with an
/// empty denominator.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub field_acc: FieldAccuracy,
    pub mean_iou: Option<f64>,
    pub match_acc_overall: Option<f64>,
    pub match_acc_by_category: BTreeMap<Category, Option<f64>>,
    pub opr: Option<f64>,
    pub upr: Option<f64>,
    pub counts: Counts,
}

impl EvalReport {
    pub fn from_tally(t: &Tally, samples: usize) -> EvalReport {
        let f = |k: usize| percent(t.field_correct[k], t.field_eligible[k]);
        EvalReport {
            field_acc: FieldAccuracy {
                diff_type: f(0),
                func: f(1),
                presence: f(2),
                param: f(3),
                magnitude: f(4),
            },
            mean_iou: (t.matched > 0).then(|| 100.0 * t.iou_sum / t.matched as f64),
            match_acc_overall: percent(t.hits, t.matched),
            match_acc_by_category: Category::ALL
                .into_iter()
                .map(|c| (c, percent(t.category_hits[c as usize], t.category_matched[c as usize])))
                .collect(),
            opr: percent(t.unmatched_pred, t.n_gt),
            upr: percent(t.unmatched_gt, t.n_gt),
            counts: Counts {
                samples,
                n_gt: t.n_gt,
                n_pred: t.n_pred,
                n_matched: t.matched,
                unmatched_pred: t.unmatched_pred,
                unmatched_gt: t.unmatched_gt,
            },
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Aligned plain-text table, one decimal, `-` for absent values.
    pub fn to_table(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.1}"));
        let mut head = Vec::new();
        let mut row = Vec::new();
        for f in Field::ALL {
            let name = match f {
                Field::Type => "Type",
                Field::Func => "Func",
                Field::Presence => "Presence",
                Field::Param => "Param",
                Field::Magnitude => "Magnitude",
            };
            head.push(name.to_string());
            row.push(fmt(self.field_acc.get(f)));
        }
        for (name, v) in [
            ("IoU", self.mean_iou),
            ("MatchAcc", self.match_acc_overall),
            ("OPR", self.opr),
            ("UPR", self.upr),
        ] {
            head.push(name.into());
            row.push(fmt(v));
        }
        head.push("|".into());
        row.push("|".into());
        for c in Category::ALL {
            let name = match c {
                Category::Trend => "Trend",
                Category::Periodic => "Periodic",
                Category::Fluctuation => "Fluctuation",
                Category::Event => "Event",
            };
            head.push(name.into());
            row.push(fmt(self.match_acc_by_category.get(&c).copied().flatten()));
        }
        let mut out = String::new();
        let widths: Vec<usize> = head.iter().zip(&row).map(|(h, r)| h.len().max(r.len())).collect();
        for line in [&head, &row] {
            let cells: Vec<String> = line.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect();
            let _ = writeln!(out, "{}", cells.join(" ").trim_end());
        }
        out
    }
}

/// Scores every sample id present in `gts`. Both maps must hold exactly the
/// same ids.
pub fn evaluate_dataset(
    predictions: &BTreeMap<String, ExplanationList>,
    gts: &BTreeMap<String, ExplanationList>,
) -> Result<EvalReport> {
    let missing: Vec<&str> = gts.keys().filter(|k| !predictions.contains_key(*k)).map(|s| s.as_str()).collect();
    let extra: Vec<&str> = predictions.keys().filter(|k| !gts.contains_key(*k)).map(|s| s.as_str()).collect();
    if !missing.is_empty() || !extra.is_empty() {
        let mut msg = String::from("prediction and ground-truth ids differ");
        if !missing.is_empty() {
            let _ = write!(msg, "; missing predictions: {}", missing.join(", "));
        }
        if !extra.is_empty() {
            let _ = write!(msg, "; unknown ids in predictions: {}", extra.join(", "));
        }
        return Err(Error::Data(msg));
    }
    let pairs: Vec<(&ExplanationList, &ExplanationList)> =
        gts.iter().map(|(id, g)| (&predictions[id], g)).collect();
    let tallies: Vec<Tally> = pairs
        .par_iter()
        .map(|(p, g)| Tally::of(p, g, &align(p, g), IOU_GATE))
        .collect();
    let total = tallies.iter().fold(Tally::default(), |acc, t| acc.merge(t));
    Ok(EvalReport::from_tally(&total, gts.len()))
}

/// Reads a JSON-lines file of `{"id": ..., "<key>": [records]}` objects,
/// where the list key is `explanation` or `ground_truth` (manifests).
pub fn read_explanations(path: &Path, mode: ParseMode) -> Result<BTreeMap<String, ExplanationList>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = BTreeMap::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(&line).map_err(|e| Error::Syntax {
            line: i + 1,
            column: e.column(),
            message: format!("{}: {e}", path.display()),
        })?;
        let bad = |m: &str| Error::Data(format!("{} line {}: {m}", path.display(), i + 1));
        let id = value
            .get("id")
            .and_then(Value::as_str)
            .ok_or_else(|| bad("missing string \"id\""))?
            .to_string();
        let list = value
            .get("explanation")
            .or_else(|| value.get("ground_truth"))
            .ok_or_else(|| bad("missing \"explanation\" or \"ground_truth\""))?;
        let list = match schema::parse_value(list, mode) {
            Ok(l) => l,
            Err(Error::Schema { record, violations }) => {
                return Err(bad(&format!(
                    "sample {id} record {record}: {}",
                    violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
                )))
            }
            Err(e) => return Err(e),
        };
        if out.insert(id.clone(), list).is_some() {
            return Err(bad(&format!("duplicate id {id}")));
        }
    }
    Ok(out)
}

/// One `{"id": ..., "explanation": [...]}` line per entry, records in
/// canonical form.
pub fn predictions_text(entries: &[(String, ExplanationList)]) -> Result<String> {
    let mut out = String::new();
    let mut seen = BTreeSet::new();
    for (id, list) in entries {
        if !seen.insert(id) {
            return Err(Error::Data(format!("duplicate id {id}")));
        }
        let id = serde_json::to_string(id).expect("string serializes");
        let _ = writeln!(out, "{{\"id\": {id}, \"explanation\": {}}}", schema::serialize(list)?);
    }
    Ok(out)
}
