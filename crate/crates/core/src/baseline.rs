//! Baseline series: synthetic families, CSV corpora, and the resample /
//! truncate / z-normalize step applied to every raw series.

use std::f64::consts::TAU;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::TimeSeries;

/// Floor applied to the standard deviation during z-normalization.
pub const STD_FLOOR: f64 = 1e-8;

/// Synthetic baseline families.
///
/// * `RandomWalk`: cumulative sum of i.i.d. N(0, 1) steps from 0.
/// * `Ar1`: `x[t] = phi * x[t-1] + e[t]`, `e ~ N(0, 1)`, started from the
///   stationary law. `phi` is drawn from U[0.5, 0.95] unless fixed.
/// * `SineMix`: three sinusoids, amplitudes U[0.2, 1], 0.5 to 6 cycles per
///   series, uniform phases.
/// * `PiecewiseConst`: 1 to 5 segments (unless fixed) with N(0, 1) levels
///   and uniformly placed breakpoints.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BaselineKind {
    RandomWalk,
    Ar1 { coefficient: Option<f64> },
    SineMix,
    PiecewiseConst { segments: Option<usize> },
}

/// Draws a raw length-`length` series of the given family.
pub fn synth_baseline<R: Rng + ?Sized>(kind: BaselineKind, length: usize, rng: &mut R) -> Vec<f64> {
    let normal = |rng: &mut R| rng.sample::<f64, _>(StandardNormal);
    match kind {
        BaselineKind::RandomWalk => {
            let mut x = 0.0;
            (0..length)
                .map(|_| {
                    x += normal(rng);
                    x
                })
                .collect()
        }
        BaselineKind::Ar1 { coefficient } => {
            let phi = coefficient.unwrap_or_else(|| rng.random_range(0.5..0.95));
            let mut x = normal(rng) / (1.0 - phi * phi).max(1e-12).sqrt();
            (0..length)
                .map(|t| {
                    if t > 0 {
                        x = phi * x + normal(rng);
                    }
                    x
                })
                .collect()
        }
        BaselineKind::SineMix => {
            let parts: Vec<(f64, f64, f64)> = (0..3)
                .map(|_| {
                    (
                        rng.random_range(0.2..1.0),
                        rng.random_range(0.5..6.0),
                        rng.random_range(0.0..TAU),
                    )
                })
                .collect();
            let denom = length.max(1) as f64;
            (0..length)
                .map(|t| {
                    let s = t as f64 / denom;
                    parts.iter().map(|(a, f, p)| a * (TAU * f * s + p).sin()).sum()
                })
                .collect()
        }
        BaselineKind::PiecewiseConst { segments } => {
            let k = segments
                .unwrap_or_else(|| rng.random_range(1..=5))
                .clamp(1, length.max(1));
            let mut cuts: Vec<usize> = Vec::with_capacity(k);
            while cuts.len() < k - 1 {
                let c = rng.random_range(1..length);
                if !cuts.contains(&c) {
                    cuts.push(c);
                }
            }
            cuts.sort_unstable();
            let levels: Vec<f64> = (0..k).map(|_| normal(rng)).collect();
            (0..length)
                .map(|t| levels[cuts.partition_point(|&c| c <= t)])
                .collect()
        }
    }
}

/// Adjusts `raw` to `length` samples (linear resampling when shorter, keep
/// the first `length` when longer) and z-normalizes it.
pub fn preprocess_baseline(raw: &[f64], length: usize) -> Result<TimeSeries> {
    if raw.is_empty() {
        return Err(Error::Data("baseline is empty".into()));
    }
    if let Some(i) = raw.iter().position(|v| !v.is_finite()) {
        return Err(Error::Data(format!("baseline sample {i} is not finite")));
    }
    let mut x = resample(raw, length);
    let n = x.len() as f64;
    // A constant series has an exact mean; summation would leave residue.
    let mean = if x.iter().all(|&v| v == x[0]) {
        x[0]
    } else {
        x.iter().sum::<f64>() / n
    };
    let std = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt().max(STD_FLOOR);
    for v in &mut x {
        *v = (*v - mean) / std;
    }
    TimeSeries::new(x)
}

fn resample(raw: &[f64], length: usize) -> Vec<f64> {
    let n = raw.len();
    if n >= length {
        return raw[..length].to_vec();
    }
    if n == 1 || length == 1 {
        return vec![raw[0]; length];
    }
    let step = (n - 1) as f64 / (length - 1) as f64;
    (0..length)
        .map(|j| {
            let pos = j as f64 * step;
            let i = (pos.floor() as usize).min(n - 2);
            let w = pos - i as f64;
            raw[i] * (1.0 - w) + raw[i + 1] * w
        })
        .collect()
}

/// Where baseline series come from.
#[derive(Clone, Debug, PartialEq)]
pub enum BaselineSource {
    Synthetic(BaselineKind),
    /// A CSV file or a directory of CSV files, one series per file.
    Corpus(PathBuf),
}

impl Default for BaselineSource {
    fn default() -> Self {
        BaselineSource::Synthetic(BaselineKind::RandomWalk)
    }
}

impl fmt::Display for BaselineSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BaselineSource::Synthetic(BaselineKind::RandomWalk) => f.write_str("random_walk"),
            BaselineSource::Synthetic(BaselineKind::Ar1 { coefficient: None }) => f.write_str("ar1"),
            BaselineSource::Synthetic(BaselineKind::Ar1 { coefficient: Some(c) }) => write!(f, "ar1:{c}"),
            BaselineSource::Synthetic(BaselineKind::SineMix) => f.write_str("sine_mix"),
            BaselineSource::Synthetic(BaselineKind::PiecewiseConst { segments: None }) => f.write_str("piecewise"),
            BaselineSource::Synthetic(BaselineKind::PiecewiseConst { segments: Some(k) }) => {
                write!(f, "piecewise:{k}")
            }
            BaselineSource::Corpus(p) => write!(f, "corpus:{}", p.display()),
        }
    }
}

impl FromStr for BaselineSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        let bad = || Error::Config(format!("unknown baseline source {s:?}"));
        let kind = match (head, arg) {
            ("random_walk", None) => BaselineKind::RandomWalk,
            ("sine_mix", None) => BaselineKind::SineMix,
            ("ar1", None) => BaselineKind::Ar1 { coefficient: None },
            ("ar1", Some(a)) => {
                let c: f64 = a.parse().map_err(|_| bad())?;
                if !(c.is_finite() && c.abs() < 1.0) {
                    return Err(Error::Config(format!("AR(1) coefficient {c} must lie in (-1, 1)")));
                }
                BaselineKind::Ar1 { coefficient: Some(c) }
            }
            ("piecewise", None) => BaselineKind::PiecewiseConst { segments: None },
            ("piecewise", Some(a)) => {
                let k: usize = a.parse().map_err(|_| bad())?;
                if k == 0 {
                    return Err(Error::Config("piecewise baseline needs at least one segment".into()));
                }
                BaselineKind::PiecewiseConst { segments: Some(k) }
            }
            ("corpus", Some(p)) if !p.is_empty() => return Ok(BaselineSource::Corpus(PathBuf::from(p))),
            _ => return Err(bad()),
        };
        Ok(BaselineSource::Synthetic(kind))
    }
}

impl Serialize for BaselineSource {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BaselineSource {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Raw series loaded from CSV files.
#[derive(Clone, Debug)]
pub struct Corpus {
    series: Vec<(String, Vec<f64>)>,
}

impl Corpus {
    /// Loads `path`: a single CSV file or every `*.csv` directly inside a
    /// directory (sorted by file name). Each file holds one series in its
    /// `value` column, or in its first column when there is none.
    pub fn load(path: &Path) -> Result<Self> {
        let meta = fs::metadata(path).map_err(|e| Error::io(path, e))?;
        let files = if meta.is_dir() {
            let mut files: Vec<PathBuf> = fs::read_dir(path)
                .map_err(|e| Error::io(path, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "csv"))
                .collect();
            files.sort();
            files
        } else {
            vec![path.to_path_buf()]
        };
        if files.is_empty() {
            return Err(Error::Data(format!("{}: no CSV files in corpus", path.display())));
        }
        let series = files
            .iter()
            .map(|f| Ok((f.display().to_string(), read_series_csv(f)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Corpus { series })
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    pub fn get(&self, i: usize) -> (&str, &[f64]) {
        let (name, values) = &self.series[i];
        (name, values)
    }
}

/// Reads one numeric column from a headed CSV file.
pub fn read_series_csv(path: &Path) -> Result<Vec<f64>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let column = headers.iter().position(|h| h.trim() == "value").unwrap_or(0);
    let mut out = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let cell = record.get(column).unwrap_or("").trim();
        let v: f64 = cell.parse().map_err(|_| {
            Error::Data(format!("{}: row {}: {cell:?} is not a number", path.display(), row + 2))
        })?;
        out.push(v);
    }
    if out.is_empty() {
        return Err(Error::Data(format!("{}: no samples", path.display())));
    }
    Ok(out)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Data(format!("{}: {other:?}", path.display())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use crate::stats;

    #[test]
    fn constant_input_becomes_zero() {
        let s = preprocess_baseline(&[4.2; 300], 300).unwrap();
        assert!(s.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn normalized_input_is_a_fixed_point() {
        let raw = synth_baseline(BaselineKind::SineMix, 300, &mut substream(1, 0));
        let once = preprocess_baseline(&raw, 300).unwrap();
        let twice = preprocess_baseline(once.values(), 300).unwrap();
        for (a, b) in once.values().iter().zip(twice.values()) {
            assert!((a - b).abs() < 1e-12);
        }
        let m = stats::moments(once.values());
        assert!(m.mean.abs() < 1e-9 && (m.std - 1.0).abs() < 1e-6);
    }

    #[test]
    fn linear_resampling_by_hand() {
        assert_eq!(resample(&[0.0, 1.0, 2.0, 3.0], 7), vec![0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0]);
        assert_eq!(resample(&[5.0, 6.0, 7.0], 2), vec![5.0, 6.0]);
    }

    #[test]
    fn bad_inputs() {
        assert!(matches!(preprocess_baseline(&[], 10), Err(Error::Data(_))));
        assert!(matches!(preprocess_baseline(&[1.0, f64::NAN], 10), Err(Error::Data(_))));
    }

    #[test]
    fn random_walk_is_persistent() {
        let x = synth_baseline(BaselineKind::RandomWalk, 300, &mut substream(2, 0));
        assert!(stats::lag1_autocorrelation(&x) > 0.9);
        let steps: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        assert!(stats::lag1_autocorrelation(&steps).abs() < 0.2);
    }

    #[test]
    fn white_ar1() {
        let x = synth_baseline(BaselineKind::Ar1 { coefficient: Some(0.0) }, 10_000, &mut substream(3, 0));
        assert!(stats::lag1_autocorrelation(&x).abs() < 0.05);
    }

    #[test]
    fn one_segment_is_constant() {
        let x = synth_baseline(BaselineKind::PiecewiseConst { segments: Some(1) }, 300, &mut substream(4, 0));
        assert!(x.iter().all(|&v| v == x[0]));
        let y = synth_baseline(BaselineKind::PiecewiseConst { segments: Some(4) }, 300, &mut substream(4, 1));
        let distinct = y.windows(2).filter(|w| w[0] != w[1]).count();
        assert_eq!(distinct, 3);
    }

    #[test]
    fn source_strings_round_trip() {
        for s in ["random_walk", "ar1", "ar1:0.3", "sine_mix", "piecewise", "piecewise:2", "corpus:/data/x"] {
            assert_eq!(s.parse::<BaselineSource>().unwrap().to_string(), s);
        }
        assert!("ar1:1.5".parse::<BaselineSource>().is_err());
        assert!("walk".parse::<BaselineSource>().is_err());
        assert!("corpus:".parse::<BaselineSource>().is_err());
    }

    #[test]
    fn corpus_reads_value_column() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("b.csv"), "time,value\n0,1.5\n1,2.5\n").unwrap();
        fs::write(dir.path().join("a.csv"), "x\n3\n4\n5\n").unwrap();
        fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
        let c = Corpus::load(dir.path()).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.get(0).1, &[3.0, 4.0, 5.0]);
        assert_eq!(c.get(1).1, &[1.5, 2.5]);
        let missing = Corpus::load(&dir.path().join("nope"));
        assert!(matches!(missing, Err(Error::Io { .. })));
    }
}
