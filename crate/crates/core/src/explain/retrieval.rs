//! Nearest-neighbour retrieval over difference embeddings.

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::features::{feature_embed, feature_version_hash, FEATURE_DIM};
use crate::error::{Error, Result};
use crate::pairgen::{Generator, PairSample};
use crate::schema::{self, ExplanationList, ParseMode};
use crate::series::TimeSeries;
use crate::stats;

/// `feature_embed(tgt) − feature_embed(ref)`.
pub fn difference_embedding(reference: &[f64], target: &[f64]) -> Vec<f64> {
    feature_embed(target)
        .into_iter()
        .zip(feature_embed(reference))
        .map(|(t, r)| t - r)
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct PoolEntry {
    pub features: Vec<f64>,
    pub explanation: ExplanationList,
}

/// Immutable collection of embedded pairs with their explanations.
#[derive(Clone, Debug)]
pub struct RetrievalPool {
    feature_dim: usize,
    entries: Vec<PoolEntry>,
    norms: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    feature_dim: usize,
    extractor_version: String,
    entries: usize,
}

#[derive(Serialize)]
struct EntryLine<'a> {
    features: &'a [f64],
    explanation: &'a ExplanationList,
}

#[derive(Deserialize)]
struct EntryLineOwned {
    features: Vec<f64>,
    explanation: Value,
}

fn cosine(a: &[f64], b: &[f64], na: f64, nb: f64) -> f64 {
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        stats::dot(a, b) / (na * nb)
    }
}

impl RetrievalPool {
    pub fn new(entries: Vec<PoolEntry>) -> Result<Self> {
        let feature_dim = entries.first().map_or(FEATURE_DIM, |e| e.features.len());
        if let Some(i) = entries.iter().position(|e| e.features.len() != feature_dim) {
            return Err(Error::Data(format!(
                "pool entry {i} has {} features, expected {feature_dim}",
                entries[i].features.len()
            )));
        }
        let norms = entries.iter().map(|e| stats::dot(&e.features, &e.features).sqrt()).collect();
        Ok(RetrievalPool {
            feature_dim,
            entries,
            norms,
        })
    }

    pub fn from_samples(samples: &[PairSample]) -> Result<Self> {
        let entries = samples
            .par_iter()
            .map(|s| PoolEntry {
                features: difference_embedding(s.pair.reference.values(), s.pair.target.values()),
                explanation: s.pair.ground_truth.clone(),
            })
            .collect();
        Self::new(entries)
    }

    /// Embeds samples `0..n` of `generator`, one at a time.
    pub fn build(generator: &Generator, n: u64) -> Result<Self> {
        let entries = (0..n)
            .into_par_iter()
            .map(|i| {
                let s = generator.sample(i)?;
                Ok(PoolEntry {
                    features: difference_embedding(s.pair.reference.values(), s.pair.target.values()),
                    explanation: s.pair.ground_truth,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(entries)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn entries(&self) -> &[PoolEntry] {
        &self.entries
    }

    /// Index and cosine similarity of the most similar entry; ties go to
    /// the lowest index.
    pub fn nearest(&self, query: &[f64]) -> Result<(usize, f64)> {
        if self.entries.is_empty() {
            return Err(Error::Precondition("retrieval pool is empty".into()));
        }
        if query.len() != self.feature_dim {
            return Err(Error::Data(format!(
                "query has {} features, pool has {}",
                query.len(),
                self.feature_dim
            )));
        }
        let nq = stats::dot(query, query).sqrt();
        let mut best = (0, f64::NEG_INFINITY);
        for (i, (e, &ne)) in self.entries.iter().zip(&self.norms).enumerate() {
            let s = cosine(query, &e.features, nq, ne);
            if s > best.1 {
                best = (i, s);
            }
        }
        Ok(best)
    }

    /// Writes a header line then one entry per line.
    pub fn save(&self, path: &Path) -> Result<()> {
        let header = Header {
            feature_dim: self.feature_dim,
            extractor_version: feature_version_hash(),
            entries: self.entries.len(),
        };
        let mut text = serde_json::to_string(&header).expect("header serializes");
        text.push('\n');
        for e in &self.entries {
            let line = EntryLine {
                features: &e.features,
                explanation: &e.explanation,
            };
            text.push_str(&serde_json::to_string(&line).expect("entry serializes"));
            text.push('\n');
        }
        crate::io::write_atomic(path, text.as_bytes())
    }

    /// Loads a pool written by [`save`](Self::save), rejecting files from a
    /// different feature layout.
    pub fn load(path: &Path) -> Result<Self> {
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines().enumerate();
        let syntax = |line: usize, e: serde_json::Error| Error::Syntax {
            line,
            column: e.column(),
            message: format!("{}: {e}", path.display()),
        };
        let (_, first) = lines
            .next()
            .ok_or_else(|| Error::Data(format!("{}: empty pool file", path.display())))?;
        let first = first.map_err(|e| Error::io(path, e))?;
        let header: Header = serde_json::from_str(&first).map_err(|e| syntax(1, e))?;
        if header.feature_dim != FEATURE_DIM || header.extractor_version != feature_version_hash() {
            return Err(Error::Data(format!(
                "{}: pool was built with feature_dim {} / extractor {}, this build uses {} / {}",
                path.display(),
                header.feature_dim,
                header.extractor_version,
                FEATURE_DIM,
                feature_version_hash()
            )));
        }
        let mut entries = Vec::with_capacity(header.entries);
        for (i, line) in lines {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let raw: EntryLineOwned = serde_json::from_str(&line).map_err(|e| syntax(i + 1, e))?;
            let explanation = schema::parse_value(&raw.explanation, ParseMode::Strict)?;
            entries.push(PoolEntry {
                features: raw.features,
                explanation,
            });
        }
        if entries.len() != header.entries {
            return Err(Error::Data(format!(
                "{}: header announces {} entries, found {}",
                path.display(),
                header.entries,
                entries.len()
            )));
        }
        Self::new(entries)
    }
}

/// Explanation of the pool entry most similar to the pair's difference
/// embedding.
pub fn explain_retrieval(reference: &TimeSeries, target: &TimeSeries, pool: &RetrievalPool) -> Result<ExplanationList> {
    if reference.len() != target.len() {
        return Err(Error::Data(format!(
            "reference has {} samples, target {}",
            reference.len(),
            target.len()
        )));
    }
    let q = difference_embedding(reference.values(), target.values());
    let (i, _) = pool.nearest(&q)?;
    Ok(pool.entries[i].explanation.clone())
}
