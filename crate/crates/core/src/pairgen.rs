//! Reference/target pair generation.
//!
//! A pair starts from one preprocessed baseline. `K` elementary differences
//! are drawn and each is added to whichever sides it is active on, so the
//! pointwise difference `target - reference` is exactly the signed sum of
//! the injected components and vanishes outside their intervals.

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

pub use crate::baseline::{
    preprocess_baseline, read_series_csv, synth_baseline, BaselineKind, BaselineSource, Corpus,
};
use crate::error::{Error, Result};
use crate::funclib::{
    self, Catalog, Category, FuncId, Interval, LibraryConfig, Param, ParamVector,
};
use crate::rng::{self, StreamRng};
use crate::schema::{self, DiffType, DifferenceRecord, ExplanationList, Magnitude, ParseMode, Presence};
pub use crate::series::TimeSeries;

/// Everything that determines a dataset's content.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    pub length: usize,
    pub k_min: usize,
    pub k_max: usize,
    pub seed: u64,
    pub source: BaselineSource,
    /// Restricts category sampling; `None` draws from all four.
    pub categories: Option<Vec<Category>>,
    pub library: LibraryConfig,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            length: 300,
            k_min: 1,
            k_max: 1,
            seed: 0,
            source: BaselineSource::default(),
            categories: None,
            library: LibraryConfig::default(),
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1 <= self.k_min && self.k_min <= self.k_max) {
            return Err(Error::Config(format!(
                "kmax must be ≥ kmin ≥ 1 (got kmin={}, kmax={})",
                self.k_min, self.k_max
            )));
        }
        if let Some(c) = &self.categories {
            if c.is_empty() {
                return Err(Error::Config("category filter is empty".into()));
            }
        }
        self.library.validate()
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    fn allowed_categories(&self) -> &[Category] {
        self.categories.as_deref().unwrap_or(&Category::ALL)
    }
}

/// Ground truth of one injected phenomenon.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElementaryDifference {
    pub func: FuncId,
    pub interval: Interval,
    pub theta_ref: ParamVector,
    pub theta_tgt: ParamVector,
    pub active_ref: bool,
    pub active_tgt: bool,
    pub diff_type: DiffType,
    pub diff_param: Option<Param>,
    pub noise_seed: u64,
}

impl ElementaryDifference {
    pub fn check(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Precondition(format!("{} on {:?}: {m}", self.func, self.interval)));
        if !(self.active_ref || self.active_tgt) {
            return fail("inactive on both sides");
        }
        if (self.diff_type == DiffType::Type1) != (self.active_ref != self.active_tgt) {
            return fail("type does not match activity flags");
        }
        if self.diff_type == DiffType::Type2 {
            let Some(p) = self.diff_param else {
                return fail("type-2 difference without a parameter");
            };
            let differing: Vec<Param> = self
                .theta_ref
                .iter()
                .filter(|&(q, v)| self.theta_tgt.get(q) != Some(v))
                .map(|(q, _)| q)
                .collect();
            if differing != [p] {
                return fail("parameter vectors must differ exactly in the named entry");
            }
        }
        Ok(())
    }

    /// Component added to the reference and target, when active.
    pub fn components(&self, catalog: &Catalog) -> Result<(Option<TimeSeries>, Option<TimeSeries>)> {
        let spec = catalog.spec(self.func);
        let t = catalog.length();
        let side = |active: bool, theta: &ParamVector| -> Result<Option<TimeSeries>> {
            if active {
                funclib::evaluate(spec, theta, self.interval, t, self.noise_seed).map(Some)
            } else {
                Ok(None)
            }
        };
        Ok((side(self.active_ref, &self.theta_ref)?, side(self.active_tgt, &self.theta_tgt)?))
    }

    /// This difference's contribution to `target - reference`.
    pub fn signed_component(&self, catalog: &Catalog) -> Result<TimeSeries> {
        let (r, g) = self.components(catalog)?;
        let mut out = vec![0.0; catalog.length()];
        if let Some(g) = g {
            for (o, v) in out.iter_mut().zip(g.values()) {
                *o += v;
            }
        }
        if let Some(r) = r {
            for (o, v) in out.iter_mut().zip(r.values()) {
                *o -= v;
            }
        }
        TimeSeries::new(out)
    }
}

/// Draws one elementary difference.
pub fn sample_difference<R: Rng + ?Sized>(
    catalog: &Catalog,
    config: &GenConfig,
    rng: &mut R,
) -> Result<ElementaryDifference> {
    let cats = config.allowed_categories();
    let category = cats[rng.random_range(0..cats.len())];
    let members: Vec<_> = catalog.in_category(category).collect();
    let spec = members[rng.random_range(0..members.len())];
    let base = funclib::sample_base_params(spec, rng);
    let interval = funclib::sample_interval(spec, catalog.length(), rng)?;

    let d = if rng.random_bool(0.5) {
        let on_target = rng.random_bool(0.5);
        ElementaryDifference {
            func: spec.id,
            interval,
            theta_ref: base.clone(),
            theta_tgt: base,
            active_ref: !on_target,
            active_tgt: on_target,
            diff_type: DiffType::Type1,
            diff_param: None,
            noise_seed: 0,
        }
    } else {
        let params = spec.id.modifiable();
        let p = params[rng.random_range(0..params.len())];
        let modified = funclib::modify_param(spec, &base, p, rng)?;
        let (theta_ref, theta_tgt) = if rng.random_bool(0.5) {
            (base, modified)
        } else {
            (modified, base)
        };
        ElementaryDifference {
            func: spec.id,
            interval,
            theta_ref,
            theta_tgt,
            active_ref: true,
            active_tgt: true,
            diff_type: DiffType::Type2,
            diff_param: Some(p),
            noise_seed: 0,
        }
    };
    Ok(ElementaryDifference {
        noise_seed: rng.random(),
        ..d
    })
}

/// The externally visible record of a difference.
pub fn to_record(d: &ElementaryDifference) -> Result<DifferenceRecord> {
    d.check()?;
    let interval = d.interval;
    Ok(match d.diff_type {
        DiffType::Type1 => {
            let presence = if d.active_tgt {
                Presence::Present
            } else {
                Presence::Absent
            };
            DifferenceRecord::type1(d.func, interval, presence)
        }
        DiffType::Type2 => {
            let p = d.diff_param.expect("checked");
            let (r, t) = (d.theta_ref.get(p).unwrap_or(0.0), d.theta_tgt.get(p).unwrap_or(0.0));
            let magnitude = if t.abs() > r.abs() {
                Magnitude::Larger
            } else {
                Magnitude::Smaller
            };
            DifferenceRecord::type2(d.func, interval, p, magnitude)
        }
    })
}

/// A generated pair with its ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct Pair {
    pub reference: TimeSeries,
    pub target: TimeSeries,
    pub ground_truth: ExplanationList,
    pub internal: Vec<ElementaryDifference>,
}

/// Injects `K ~ U{k_min..k_max}` differences into `baseline`.
pub fn generate_pair<R: Rng + ?Sized>(
    baseline: &TimeSeries,
    catalog: &Catalog,
    config: &GenConfig,
    rng: &mut R,
) -> Result<Pair> {
    if baseline.len() != catalog.length() {
        return Err(Error::Precondition(format!(
            "baseline has {} samples, catalog expects {}",
            baseline.len(),
            catalog.length()
        )));
    }
    let k = rng.random_range(config.k_min..=config.k_max);
    let mut reference = baseline.clone();
    let mut target = baseline.clone();
    let mut internal = Vec::with_capacity(k);
    let mut ground_truth = Vec::with_capacity(k);
    for _ in 0..k {
        let d = sample_difference(catalog, config, rng)?;
        let (r, t) = d.components(catalog)?;
        if let Some(r) = r {
            reference.add_assign(&r);
        }
        if let Some(t) = t {
            target.add_assign(&t);
        }
        ground_truth.push(to_record(&d)?);
        internal.push(d);
    }
    schema::sort_records(&mut ground_truth);
    Ok(Pair {
        reference,
        target,
        ground_truth,
        internal,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub index: u64,
    pub source: String,
    pub config_hash: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairSample {
    pub id: String,
    pub pair: Pair,
    pub provenance: Provenance,
}

/// Zero-padded identifier of sample `index`.
pub fn sample_id(index: u64) -> String {
    format!("{index:06}")
}

/// Deterministic sample factory for one configuration.
#[derive(Debug)]
pub struct Generator {
    config: GenConfig,
    catalog: Catalog,
    corpus: Option<Corpus>,
    config_hash: String,
}

impl Generator {
    pub fn new(config: GenConfig) -> Result<Self> {
        config.validate()?;
        let catalog = Catalog::new(&config.library, config.length)?;
        let corpus = match &config.source {
            BaselineSource::Corpus(p) => Some(Corpus::load(p)?),
            BaselineSource::Synthetic(_) => None,
        };
        let config_hash = config.hash();
        Ok(Generator {
            config,
            catalog,
            corpus,
            config_hash,
        })
    }

    pub fn config(&self) -> &GenConfig {
        &self.config
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn config_hash(&self) -> &str {
        &self.config_hash
    }

    fn baseline(&self, rng: &mut StreamRng) -> Result<(TimeSeries, String)> {
        let t = self.config.length;
        match (&self.config.source, &self.corpus) {
            (BaselineSource::Synthetic(kind), _) => {
                let raw = synth_baseline(*kind, t, rng);
                Ok((preprocess_baseline(&raw, t)?, self.config.source.to_string()))
            }
            (BaselineSource::Corpus(_), Some(corpus)) => {
                let (name, raw) = corpus.get(rng.random_range(0..corpus.len()));
                let series = preprocess_baseline(raw, t)
                    .map_err(|e| Error::Data(format!("{name}: {e}")))?;
                Ok((series, format!("corpus:{name}")))
            }
            (BaselineSource::Corpus(p), None) => Err(Error::Config(format!("corpus {} not loaded", p.display()))),
        }
    }

    /// Sample `index`, drawn from substream `(seed, index)`.
    pub fn sample(&self, index: u64) -> Result<PairSample> {
        let mut rng = rng::substream(self.config.seed, index);
        let (baseline, source) = self.baseline(&mut rng)?;
        let pair = generate_pair(&baseline, &self.catalog, &self.config, &mut rng)?;
        Ok(PairSample {
            id: sample_id(index),
            pair,
            provenance: Provenance {
                seed: self.config.seed,
                index,
                source,
                config_hash: self.config_hash.clone(),
            },
        })
    }

    /// Samples `0..n`, in index order either way.
    pub fn generate(&self, n: u64, parallel: bool) -> Result<Vec<PairSample>> {
        if parallel {
            (0..n).into_par_iter().map(|i| self.sample(i)).collect()
        } else {
            (0..n).map(|i| self.sample(i)).collect()
        }
    }
}

/// Generates `n` samples under `config`.
pub fn generate_dataset(config: &GenConfig, n: u64) -> Result<Vec<PairSample>> {
    Generator::new(config.clone())?.generate(n, true)
}

/// One manifest line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub length: usize,
    #[serde(rename = "ref", default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ref_file: Option<String>,
    #[serde(rename = "tgt", default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tgt_file: Option<String>,
    pub ground_truth: Value,
    pub provenance: Provenance,
}

impl ManifestEntry {
    pub fn ground_truth(&self) -> Result<ExplanationList> {
        schema::parse_value(&self.ground_truth, ParseMode::Strict)
    }

    /// Loads both series, inline or from sidecar files relative to `dir`.
    pub fn series(&self, dir: &Path) -> Result<(TimeSeries, TimeSeries)> {
        let load = |inline: &Option<Vec<f64>>, file: &Option<String>, side: &str| -> Result<TimeSeries> {
            let values = match (inline, file) {
                (Some(v), _) => v.clone(),
                (None, Some(f)) => read_series_csv(&dir.join(f))?,
                (None, None) => return Err(Error::Data(format!("sample {}: no {side} series", self.id))),
            };
            if values.len() != self.length {
                return Err(Error::Data(format!(
                    "sample {}: {side} has {} samples, expected {}",
                    self.id,
                    values.len(),
                    self.length
                )));
            }
            TimeSeries::new(values)
        };
        Ok((load(&self.reference, &self.ref_file, "ref")?, load(&self.target, &self.tgt_file, "tgt")?))
    }
}

/// Output options for [`write_dataset`].
#[derive(Clone, Copy, Debug, Default)]
pub struct WriteOptions {
    /// Store series as `series/<id>_{ref,tgt}.csv` instead of inline.
    pub csv_sidecar: bool,
    /// Also write `plots/<id>.csv` with `ref,tgt` columns.
    pub plot: bool,
}

pub const MANIFEST_FILE: &str = "manifest.jsonl";

fn write_column_csv(path: &Path, header: &str, rows: impl Iterator<Item = String>) -> Result<()> {
    let mut text = String::from(header);
    text.push('\n');
    for r in rows {
        text.push_str(&r);
        text.push('\n');
    }
    crate::io::write_atomic(path, text.as_bytes())
}

/// Writes the manifest (and optional sidecars) under `dir`. Returns the
/// manifest path.
pub fn write_dataset(samples: &[PairSample], dir: &Path, options: WriteOptions) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    if options.csv_sidecar {
        fs::create_dir_all(dir.join("series")).map_err(|e| Error::io(dir.join("series"), e))?;
    }
    if options.plot {
        fs::create_dir_all(dir.join("plots")).map_err(|e| Error::io(dir.join("plots"), e))?;
    }
    let mut manifest = String::new();
    for s in samples {
        let (r, t) = (s.pair.reference.values(), s.pair.target.values());
        let mut entry = ManifestEntry {
            id: s.id.clone(),
            length: r.len(),
            reference: None,
            ref_file: None,
            target: None,
            tgt_file: None,
            ground_truth: serde_json::to_value(&s.pair.ground_truth).expect("records serialize"),
            provenance: s.provenance.clone(),
        };
        if options.csv_sidecar {
            let rf = format!("series/{}_ref.csv", s.id);
            let tf = format!("series/{}_tgt.csv", s.id);
            write_column_csv(&dir.join(&rf), "value", r.iter().map(|v| v.to_string()))?;
            write_column_csv(&dir.join(&tf), "value", t.iter().map(|v| v.to_string()))?;
            entry.ref_file = Some(rf);
            entry.tgt_file = Some(tf);
        } else {
            entry.reference = Some(r.to_vec());
            entry.target = Some(t.to_vec());
        }
        if options.plot {
            write_column_csv(
                &dir.join(format!("plots/{}.csv", s.id)),
                "ref,tgt",
                r.iter().zip(t).map(|(a, b)| format!("{a},{b}")),
            )?;
        }
        manifest.push_str(&serde_json::to_string(&entry).expect("entry serializes"));
        manifest.push('\n');
    }
    let path = dir.join(MANIFEST_FILE);
    crate::io::write_atomic(&path, manifest.as_bytes())?;
    Ok(path)
}

/// Reads every line of a manifest.
pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: ManifestEntry = serde_json::from_str(&line).map_err(|e| Error::Syntax {
            line: i + 1,
            column: e.column(),
            message: format!("{}: {e}", path.display()),
        })?;
        out.push(entry);
    }
    Ok(out)
}
