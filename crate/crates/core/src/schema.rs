//! Structured difference records: validation, strict and lenient parsing,
//! canonical serialization, and the published JSON Schema document.
//!
//! Canonical text is a single-line JSON array. Every object carries the
//! seven keys in the fixed order `type, func, start, end, presence, param,
//! magnitude`, with explicit `null`s and `": "` / `", "` separators, so equal
//! lists always produce identical bytes.

use std::fmt;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::funclib::{Category, FuncId, Interval, Param};

/// Key order of a canonical record.
pub const KEYS: [&str; 7] = ["type", "func", "start", "end", "presence", "param", "magnitude"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DiffType {
    #[serde(rename = "TYPE1")]
    Type1,
    #[serde(rename = "TYPE2")]
    Type2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Presence {
    Present,
    Absent,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Magnitude {
    Larger,
    Smaller,
}

impl DiffType {
    pub fn as_str(self) -> &'static str {
        match self {
            DiffType::Type1 => "TYPE1",
            DiffType::Type2 => "TYPE2",
        }
    }
}

impl Presence {
    pub fn as_str(self) -> &'static str {
        match self {
            Presence::Present => "PRESENT",
            Presence::Absent => "ABSENT",
        }
    }
}

impl Magnitude {
    pub fn as_str(self) -> &'static str {
        match self {
            Magnitude::Larger => "LARGER",
            Magnitude::Smaller => "SMALLER",
        }
    }
}

/// One elementary difference as it appears in an explanation.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct DifferenceRecord {
    #[serde(rename = "type")]
    pub diff_type: DiffType,
    pub func: FuncId,
    pub start: usize,
    pub end: usize,
    pub presence: Option<Presence>,
    pub param: Option<Param>,
    pub magnitude: Option<Magnitude>,
}

pub type ExplanationList = Vec<DifferenceRecord>;

impl DifferenceRecord {
    pub fn type1(func: FuncId, interval: Interval, presence: Presence) -> Self {
        DifferenceRecord {
            diff_type: DiffType::Type1,
            func,
            start: interval.start,
            end: interval.end,
            presence: Some(presence),
            param: None,
            magnitude: None,
        }
    }

    pub fn type2(func: FuncId, interval: Interval, param: Param, magnitude: Magnitude) -> Self {
        DifferenceRecord {
            diff_type: DiffType::Type2,
            func,
            start: interval.start,
            end: interval.end,
            presence: None,
            param: Some(param),
            magnitude: Some(magnitude),
        }
    }

    pub fn interval(&self) -> Interval {
        Interval::new(self.start, self.end)
    }

    pub fn category(&self) -> Category {
        self.func.category()
    }

    fn sort_key(&self) -> impl Ord + '_ {
        (
            self.start,
            self.func.as_str(),
            self.end,
            self.diff_type,
            self.presence,
            self.param,
            self.magnitude,
        )
    }
}

/// Orders records by start, then function name, then the remaining fields.
pub fn sort_records(list: &mut [DifferenceRecord]) {
    list.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
}

/// A single broken rule. Parse-level problems and record-level invariant
/// failures share this type so callers can report both uniformly.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    NotAnArray,
    NotAnObject,
    UnknownKey(String),
    MissingField(&'static str),
    KeyOrder,
    WrongType {
        field: &'static str,
        expected: &'static str,
    },
    UnknownEnum {
        field: &'static str,
        value: String,
    },
    PresenceRequired,
    ParamMustBeNull,
    MagnitudeMustBeNull,
    PresenceMustBeNull,
    ParamRequired,
    MagnitudeRequired,
    ParamNotModifiable {
        func: FuncId,
        param: Param,
    },
    StartAfterEnd {
        start: usize,
        end: usize,
    },
    EndOutOfRange {
        end: usize,
        length: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NotAnArray => f.write_str("explanation must be a JSON array"),
            Violation::NotAnObject => f.write_str("record must be a JSON object"),
            Violation::UnknownKey(k) => write!(f, "unknown key {k:?}"),
            Violation::MissingField(k) => write!(f, "missing field {k:?}"),
            Violation::KeyOrder => {
                f.write_str("keys must appear in order type, func, start, end, presence, param, magnitude")
            }
            Violation::WrongType { field, expected } => write!(f, "{field} must be {expected}"),
            Violation::UnknownEnum { field, value } => {
                write!(f, "unknown enum for {field}: {value:?}")
            }
            Violation::PresenceRequired => f.write_str("presence must be PRESENT or ABSENT for TYPE1"),
            Violation::ParamMustBeNull => f.write_str("param must be null for TYPE1"),
            Violation::MagnitudeMustBeNull => f.write_str("magnitude must be null for TYPE1"),
            Violation::PresenceMustBeNull => f.write_str("presence must be null for TYPE2"),
            Violation::ParamRequired => f.write_str("param must be set for TYPE2"),
            Violation::MagnitudeRequired => f.write_str("magnitude must be LARGER or SMALLER for TYPE2"),
            Violation::ParamNotModifiable { func, param } => {
                write!(f, "param {param} cannot differ for {func}")
            }
            Violation::StartAfterEnd { start, end } => write!(f, "start {start} exceeds end {end}"),
            Violation::EndOutOfRange { end, length } => {
                write!(f, "end {end} outside series of length {length}")
            }
        }
    }
}

/// Checks every record invariant. `length`, when known, bounds `end`.
pub fn validate(record: &DifferenceRecord, length: Option<usize>) -> Vec<Violation> {
    let mut v = Vec::new();
    match record.diff_type {
        DiffType::Type1 => {
            if record.presence.is_none() {
                v.push(Violation::PresenceRequired);
            }
            if record.param.is_some() {
                v.push(Violation::ParamMustBeNull);
            }
            if record.magnitude.is_some() {
                v.push(Violation::MagnitudeMustBeNull);
            }
        }
        DiffType::Type2 => {
            if record.presence.is_some() {
                v.push(Violation::PresenceMustBeNull);
            }
            if record.param.is_none() {
                v.push(Violation::ParamRequired);
            }
            if record.magnitude.is_none() {
                v.push(Violation::MagnitudeRequired);
            }
        }
    }
    if let Some(p) = record.param {
        if !record.func.modifiable().contains(&p) {
            v.push(Violation::ParamNotModifiable {
                func: record.func,
                param: p,
            });
        }
    }
    if record.start > record.end {
        v.push(Violation::StartAfterEnd {
            start: record.start,
            end: record.end,
        });
    }
    if let Some(length) = length {
        if record.end >= length {
            v.push(Violation::EndOutOfRange {
                end: record.end,
                length,
            });
        }
    }
    v
}

/// Reader strictness.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ParseMode {
    /// Exact key set in canonical order, uppercase enums, no missing fields.
    #[default]
    Strict,
    /// Also accepts reordered keys and treats missing nullable fields as null.
    Lenient,
}

/// Outcome of reading one array: parsed records and per-record violations.
#[derive(Debug, Default)]
pub struct Inspection {
    pub records: Vec<Option<DifferenceRecord>>,
    /// `(record index, violations)` for every rejected record.
    pub rejected: Vec<(usize, Vec<Violation>)>,
}

impl Inspection {
    pub fn is_valid(&self) -> bool {
        self.rejected.is_empty()
    }

    pub fn into_list(self) -> Result<ExplanationList> {
        if let Some((record, violations)) = self.rejected.into_iter().next() {
            return Err(Error::Schema { record, violations });
        }
        Ok(self.records.into_iter().flatten().collect())
    }
}

/// Converts serde_json's syntax errors into positioned crate errors.
pub fn syntax_error(e: &serde_json::Error) -> Error {
    Error::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

/// Parses explanation text, failing on the first rejected record.
pub fn parse(text: &str, mode: ParseMode) -> Result<ExplanationList> {
    let value: Value = serde_json::from_str(text).map_err(|e| syntax_error(&e))?;
    inspect_value(&value, mode, None).into_list()
}

/// Parses an already-decoded JSON value.
pub fn parse_value(value: &Value, mode: ParseMode) -> Result<ExplanationList> {
    inspect_value(value, mode, None).into_list()
}

/// Reads every record of an array and collects all violations.
pub fn inspect_value(value: &Value, mode: ParseMode, length: Option<usize>) -> Inspection {
    let Some(items) = value.as_array() else {
        return Inspection {
            records: Vec::new(),
            rejected: vec![(0, vec![Violation::NotAnArray])],
        };
    };
    let mut out = Inspection::default();
    for (i, item) in items.iter().enumerate() {
        match record_from_value(item, mode) {
            Ok(rec) => {
                let v = validate(&rec, length);
                if v.is_empty() {
                    out.records.push(Some(rec));
                } else {
                    out.records.push(None);
                    out.rejected.push((i, v));
                }
            }
            Err(v) => {
                out.records.push(None);
                out.rejected.push((i, v));
            }
        }
    }
    out
}

fn enum_field<T: Copy>(
    obj: &Map<String, Value>,
    field: &'static str,
    options: &[(&str, T)],
    nullable: bool,
    mode: ParseMode,
    errs: &mut Vec<Violation>,
) -> Option<T> {
    let value = match obj.get(field) {
        Some(v) => v,
        None if nullable && mode == ParseMode::Lenient => return None,
        None => {
            errs.push(Violation::MissingField(field));
            return None;
        }
    };
    match value {
        Value::Null if nullable => None,
        Value::String(s) => match options.iter().find(|(name, _)| *name == s) {
            Some(&(_, t)) => Some(t),
            None => {
                errs.push(Violation::UnknownEnum {
                    field,
                    value: s.clone(),
                });
                None
            }
        },
        _ => {
            errs.push(Violation::WrongType {
                field,
                expected: if nullable { "a string or null" } else { "a string" },
            });
            None
        }
    }
}

fn index_field(obj: &Map<String, Value>, field: &'static str, errs: &mut Vec<Violation>) -> Option<usize> {
    match obj.get(field) {
        None => {
            errs.push(Violation::MissingField(field));
            None
        }
        Some(v) => match v.as_u64() {
            Some(n) => Some(n as usize),
            None => {
                errs.push(Violation::WrongType {
                    field,
                    expected: "a non-negative integer",
                });
                None
            }
        },
    }
}

/// Decodes one object without checking cross-field invariants.
pub fn record_from_value(value: &Value, mode: ParseMode) -> std::result::Result<DifferenceRecord, Vec<Violation>> {
    let Some(obj) = value.as_object() else {
        return Err(vec![Violation::NotAnObject]);
    };
    let mut errs = Vec::new();
    for k in obj.keys() {
        if !KEYS.contains(&k.as_str()) {
            errs.push(Violation::UnknownKey(k.clone()));
        }
    }
    if mode == ParseMode::Strict
        && errs.is_empty()
        && obj.len() == KEYS.len()
        && !obj.keys().map(String::as_str).eq(KEYS)
    {
        errs.push(Violation::KeyOrder);
    }

    let types = [("TYPE1", DiffType::Type1), ("TYPE2", DiffType::Type2)];
    let funcs: Vec<(&str, FuncId)> = FuncId::ALL.iter().map(|f| (f.as_str(), *f)).collect();
    let presences = [("PRESENT", Presence::Present), ("ABSENT", Presence::Absent)];
    let params: Vec<(&str, Param)> = Param::ALL.iter().map(|p| (p.as_str(), *p)).collect();
    let magnitudes = [("LARGER", Magnitude::Larger), ("SMALLER", Magnitude::Smaller)];

    let diff_type = enum_field(obj, "type", &types, false, mode, &mut errs);
    let func = enum_field(obj, "func", &funcs, false, mode, &mut errs);
    let start = index_field(obj, "start", &mut errs);
    let end = index_field(obj, "end", &mut errs);
    let presence = enum_field(obj, "presence", &presences, true, mode, &mut errs);
    let param = enum_field(obj, "param", &params, true, mode, &mut errs);
    let magnitude = enum_field(obj, "magnitude", &magnitudes, true, mode, &mut errs);

    match (diff_type, func, start, end) {
        (Some(diff_type), Some(func), Some(start), Some(end)) if errs.is_empty() => Ok(DifferenceRecord {
            diff_type,
            func,
            start,
            end,
            presence,
            param,
            magnitude,
        }),
        _ => Err(errs),
    }
}

fn push_nullable(out: &mut String, key: &str, value: Option<&str>) {
    match value {
        Some(s) => {
            let _ = write!(out, ", \"{key}\": \"{s}\"");
        }
        None => {
            let _ = write!(out, ", \"{key}\": null");
        }
    }
}

/// Canonical text of one record (assumed valid).
pub fn record_text(r: &DifferenceRecord) -> String {
    let mut out = String::with_capacity(128);
    let _ = write!(
        out,
        "{{\"type\": \"{}\", \"func\": \"{}\", \"start\": {}, \"end\": {}",
        r.diff_type.as_str(),
        r.func.as_str(),
        r.start,
        r.end
    );
    push_nullable(&mut out, "presence", r.presence.map(Presence::as_str));
    push_nullable(&mut out, "param", r.param.map(Param::as_str));
    push_nullable(&mut out, "magnitude", r.magnitude.map(Magnitude::as_str));
    out.push('}');
    out
}

/// Canonical single-line JSON for a list of valid records.
pub fn serialize(list: &[DifferenceRecord]) -> Result<String> {
    for (i, r) in list.iter().enumerate() {
        let violations = validate(r, None);
        if !violations.is_empty() {
            return Err(Error::Schema {
                record: i,
                violations,
            });
        }
    }
    let body: Vec<String> = list.iter().map(record_text).collect();
    Ok(format!("[{}]", body.join(", ")))
}

/// `serialize(parse(text))`.
pub fn canonicalize(text: &str, mode: ParseMode) -> Result<String> {
    serialize(&parse(text, mode)?)
}

/// Machine-readable JSON Schema (draft 2020-12) of an explanation list.
pub fn json_schema() -> Value {
    let names = |it: &mut dyn Iterator<Item = &'static str>| Value::from(it.collect::<Vec<_>>());
    let funcs = names(&mut FuncId::ALL.iter().map(|f| f.as_str()));
    let params = names(&mut Param::ALL.iter().map(|p| p.as_str()));
    let periodic = names(
        &mut FuncId::ALL
            .iter()
            .filter(|f| f.category() == Category::Periodic)
            .map(|f| f.as_str()),
    );
    json!({
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "$id": "tsdiff/difference-explanation",
        "title": "Difference explanation",
        "type": "array",
        "items": { "$ref": "#/$defs/record" },
        "$defs": {
            "record": {
                "type": "object",
                "additionalProperties": false,
                "required": KEYS,
                "properties": {
                    "type": { "enum": ["TYPE1", "TYPE2"] },
                    "func": { "enum": funcs },
                    "start": { "type": "integer", "minimum": 0 },
                    "end": { "type": "integer", "minimum": 0 },
                    "presence": { "enum": ["PRESENT", "ABSENT", null] },
                    "param": { "enum": params.as_array().unwrap().iter().cloned().chain([Value::Null]).collect::<Vec<_>>() },
                    "magnitude": { "enum": ["LARGER", "SMALLER", null] }
                },
                "allOf": [
                    {
                        "if": { "properties": { "type": { "const": "TYPE1" } } },
                        "then": { "properties": {
                            "presence": { "enum": ["PRESENT", "ABSENT"] },
                            "param": { "const": null },
                            "magnitude": { "const": null }
                        } }
                    },
                    {
                        "if": { "properties": { "type": { "const": "TYPE2" } } },
                        "then": { "properties": {
                            "presence": { "const": null },
                            "param": { "enum": ["AMPLITUDE", "FREQUENCY"] },
                            "magnitude": { "enum": ["LARGER", "SMALLER"] }
                        } }
                    },
                    {
                        "if": {
                            "properties": { "param": { "const": "FREQUENCY" } },
                            "required": ["param"]
                        },
                        "then": { "properties": { "func": { "enum": periodic } } }
                    }
                ],
                "x-key-order": KEYS,
                "x-rule": "start <= end < series length"
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table1_row1_truth() -> DifferenceRecord {
        DifferenceRecord::type2(
            FuncId::TriangleWave,
            Interval::new(36, 237),
            Param::Frequency,
            Magnitude::Larger,
        )
    }

    #[test]
    fn table1_records_validate() {
        assert!(validate(&table1_row1_truth(), Some(300)).is_empty());
        let drop = DifferenceRecord::type1(FuncId::Drop, Interval::new(268, 268), Presence::Present);
        assert!(validate(&drop, Some(300)).is_empty());
        let mut bad = drop.clone();
        bad.param = Some(Param::Amplitude);
        let v = validate(&bad, Some(300));
        assert_eq!(v, vec![Violation::ParamMustBeNull]);
        assert_eq!(v[0].to_string(), "param must be null for TYPE1");
    }

    #[test]
    fn table1_generated_output_parses_leniently() {
        let text = r#"[{"type": "TYPE2", "func": "TRIANGLE_WAVE", "start": 47, "end": 237,
                        "param": "FREQUENCY", "magnitude": "LARGER"}]"#;
        let list = parse(text, ParseMode::Lenient).unwrap();
        assert_eq!(list.len(), 1);
        assert_eq!(list[0].func, FuncId::TriangleWave);
        assert_eq!(list[0].start, 47);
        // the table omits the null field, which strict mode refuses
        assert!(parse(text, ParseMode::Strict).is_err());
    }

    #[test]
    fn empty_array_is_accepted() {
        assert!(parse("[]", ParseMode::Strict).unwrap().is_empty());
    }

    #[test]
    fn closed_enums() {
        let text = r#"[{"type": "TYPE3", "func": "DROP", "start": 1, "end": 1, "presence": "PRESENT", "param": null, "magnitude": null}]"#;
        let err = parse(text, ParseMode::Strict).unwrap_err();
        assert!(err.to_string().contains("unknown enum for type"), "{err}");
        let lower = text.replace("TYPE3", "type1");
        assert!(parse(&lower, ParseMode::Lenient).is_err());
    }

    #[test]
    fn magnitude_text() {
        let s = serialize(&[table1_row1_truth()]).unwrap();
        assert!(s.contains("\"magnitude\": \"LARGER\""));
        assert_eq!(
            s,
            r#"[{"type": "TYPE2", "func": "TRIANGLE_WAVE", "start": 36, "end": 237, "presence": null, "param": "FREQUENCY", "magnitude": "LARGER"}]"#
        );
        assert_eq!(s, serialize(&[table1_row1_truth()]).unwrap());
    }

    #[test]
    fn serialize_refuses_invalid() {
        let mut r = table1_row1_truth();
        r.magnitude = None;
        assert!(matches!(serialize(&[r]), Err(Error::Schema { record: 0, .. })));
    }

    #[test]
    fn strict_rejects_reordering_and_unknown_keys() {
        let reordered = r#"[{"func": "DROP", "type": "TYPE1", "start": 1, "end": 1, "presence": "PRESENT", "param": null, "magnitude": null}]"#;
        assert!(parse(reordered, ParseMode::Strict).is_err());
        assert!(parse(reordered, ParseMode::Lenient).is_ok());
        let extra = r#"[{"type": "TYPE1", "func": "DROP", "start": 1, "end": 1, "presence": "PRESENT", "param": null, "magnitude": null, "note": 1}]"#;
        for mode in [ParseMode::Strict, ParseMode::Lenient] {
            let err = parse(extra, mode).unwrap_err();
            assert!(err.to_string().contains("unknown key"), "{err}");
        }
    }

    #[test]
    fn wrong_types_and_syntax_errors() {
        let text = r#"[{"type": "TYPE1", "func": "DROP", "start": -1, "end": "x", "presence": "PRESENT", "param": null, "magnitude": null}]"#;
        let Err(Error::Schema { violations, .. }) = parse(text, ParseMode::Strict) else {
            panic!("expected schema error");
        };
        assert_eq!(violations.len(), 2);
        let err = parse("[{\"type\": ", ParseMode::Strict).unwrap_err();
        assert!(matches!(err, Error::Syntax { line: 1, .. }), "{err}");
        assert!(matches!(parse("{}", ParseMode::Strict), Err(Error::Schema { .. })));
    }

    #[test]
    fn param_must_be_modifiable() {
        let r = DifferenceRecord::type2(FuncId::Sigmoid, Interval::new(0, 50), Param::Frequency, Magnitude::Smaller);
        assert_eq!(
            validate(&r, None),
            vec![Violation::ParamNotModifiable {
                func: FuncId::Sigmoid,
                param: Param::Frequency
            }]
        );
    }

    #[test]
    fn ordering_is_by_start_then_name() {
        let mut list = vec![
            DifferenceRecord::type1(FuncId::Spike, Interval::new(10, 10), Presence::Absent),
            DifferenceRecord::type1(FuncId::Drop, Interval::new(10, 10), Presence::Present),
            DifferenceRecord::type1(FuncId::Sigmoid, Interval::new(3, 90), Presence::Present),
        ];
        sort_records(&mut list);
        let funcs: Vec<_> = list.iter().map(|r| r.func).collect();
        assert_eq!(funcs, [FuncId::Sigmoid, FuncId::Drop, FuncId::Spike]);
    }

    #[test]
    fn shipped_schema_document_is_current() {
        let shipped: Value = serde_json::from_str(include_str!("../schema/difference_record.schema.json")).unwrap();
        assert_eq!(shipped, json_schema());
    }
}
