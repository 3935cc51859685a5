//! Command-line front end.
//!
//! Exit codes: 0 success, 1 runtime or data failure, 2 usage error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use crate::baseline::BaselineSource;
use crate::error::{Error, Result};
use crate::evaluator::{self, predictions_text};
use crate::explain::{self, ExplainConfig, RetrievalPool};
use crate::funclib::Category;
use crate::io::{read_to_string, write_atomic};
use crate::pairgen::{self, GenConfig, Generator, ManifestEntry, WriteOptions, MANIFEST_FILE};
use crate::schema::{self, ExplanationList, ParseMode};

pub const RUN_MANIFEST: &str = "run.json";

#[derive(Parser, Debug)]
#[command(name = "tsdiff", version, about = "Synthetic time-series difference explanations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a dataset of reference/target pairs with ground truth.
    Generate(GenerateArgs),
    /// Explain every pair of a dataset.
    Explain(ExplainArgs),
    /// Score predictions against ground truth.
    Evaluate(EvaluateArgs),
    /// Check explanation records against the schema.
    Validate(ValidateArgs),
    /// Build a retrieval pool.
    Pool(PoolArgs),
    /// Print the JSON schema of explanation records.
    Schema(SchemaArgs),
}

#[derive(clap::Args, Debug)]
struct DataArgs {
    /// Minimum differences per pair.
    #[arg(long)]
    kmin: Option<usize>,
    /// Maximum differences per pair.
    #[arg(long)]
    kmax: Option<usize>,
    /// Samples per series.
    #[arg(long)]
    length: Option<usize>,
    /// Seed for every random draw.
    #[arg(long)]
    seed: u64,
    /// random_walk | ar1[:phi] | sine_mix | piecewise[:k] | corpus:PATH
    #[arg(long)]
    source: Option<String>,
    /// Restrict sampled categories (comma separated).
    #[arg(long, value_delimiter = ',')]
    categories: Option<Vec<String>>,
    /// TOML generation config; explicit flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(clap::Args, Debug)]
struct GenerateArgs {
    /// Number of pairs.
    #[arg(long)]
    n: u64,
    #[command(flatten)]
    data: DataArgs,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Store series as CSV sidecars instead of inline.
    #[arg(long)]
    csv: bool,
    /// Also write per-sample `ref,tgt` CSV overlays under plots/.
    #[arg(long)]
    plot: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Method {
    Lsq,
    Retrieval,
    Oracle,
}

#[derive(clap::Args, Debug)]
struct ExplainArgs {
    #[arg(long, value_enum)]
    method: Method,
    /// Retrieval pool file (required for `retrieval`).
    #[arg(long)]
    pool: Option<PathBuf>,
    /// Dataset directory or manifest file.
    #[arg(long = "in")]
    input: PathBuf,
    /// Predictions file (JSON lines).
    #[arg(long)]
    out: PathBuf,
    /// TOML explainer settings for `lsq`.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(clap::Args, Debug)]
struct EvaluateArgs {
    /// Predictions file.
    #[arg(long)]
    pred: PathBuf,
    /// Ground truth: a manifest or a predictions-shaped file.
    #[arg(long)]
    gt: PathBuf,
    /// Report directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Accept reordered keys and omitted null fields in predictions.
    #[arg(long)]
    lenient: bool,
}

#[derive(clap::Args, Debug)]
struct ValidateArgs {
    /// JSON array file, or JSON lines of arrays / objects holding one.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    lenient: bool,
}

#[derive(clap::Args, Debug)]
struct PoolArgs {
    /// Number of pool entries.
    #[arg(long, default_value_t = 50_000)]
    n: u64,
    #[command(flatten)]
    data: DataArgs,
    /// Pool file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args, Debug)]
struct SchemaArgs {
    /// Write to a file instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Provenance of one command invocation.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub version: String,
    pub config_hash: Option<String>,
    pub seed: Option<u64>,
    pub config: Option<Value>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub duration_seconds: f64,
}

enum Failure {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

type CmdResult = std::result::Result<(), Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

struct Run {
    command: &'static str,
    args: Vec<String>,
    started: Instant,
}

impl Run {
    fn finish(
        &self,
        path: &Path,
        config: Option<&GenConfig>,
        inputs: &[&Path],
        outputs: &[&Path],
    ) -> Result<()> {
        let m = RunManifest {
            command: self.command.to_string(),
            args: self.args.clone(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: config.map(GenConfig::hash),
            seed: config.map(|c| c.seed),
            config: config.map(|c| serde_json::to_value(c).expect("config serializes")),
            inputs: inputs.iter().map(|p| p.display().to_string()).collect(),
            outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
            duration_seconds: self.started.elapsed().as_secs_f64(),
        };
        let text = serde_json::to_string_pretty(&m).expect("manifest serializes");
        write_atomic(path, text.as_bytes())
    }
}

fn sidecar_manifest(file: &Path) -> PathBuf {
    let mut name = file.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".run.json");
    file.with_file_name(name)
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(())
}

fn resolve_config(data: &DataArgs) -> std::result::Result<GenConfig, Failure> {
    let mut config = match &data.config {
        Some(p) => GenConfig::from_toml(&read_to_string(p)?).map_err(|e| usage(format!("{}: {e}", p.display())))?,
        None => GenConfig::default(),
    };
    config.seed = data.seed;
    if let Some(k) = data.kmin {
        config.k_min = k;
    }
    if let Some(k) = data.kmax {
        config.k_max = k;
    }
    if let Some(t) = data.length {
        config.length = t;
    }
    if let Some(s) = &data.source {
        config.source = s.parse::<BaselineSource>().map_err(|e| usage(e.to_string()))?;
    }
    if let Some(cats) = &data.categories {
        let parsed = cats
            .iter()
            .map(|c| c.trim().to_ascii_uppercase().parse::<Category>())
            .collect::<Result<Vec<_>>>()
            .map_err(|e| usage(e.to_string()))?;
        config.categories = Some(parsed);
    }
    if !(1 <= config.k_min && config.k_min <= config.k_max) {
        return Err(usage(format!(
            "kmax must be ≥ kmin ≥ 1 (got kmin={}, kmax={})",
            config.k_min, config.k_max
        )));
    }
    config.validate().map_err(|e| usage(e.to_string()))?;
    Ok(config)
}

fn generator(config: GenConfig) -> std::result::Result<Generator, Failure> {
    Generator::new(config).map_err(|e| match e {
        Error::Config(m) => usage(m),
        other => Failure::Runtime(other),
    })
}

fn cmd_generate(args: GenerateArgs, run: &Run) -> CmdResult {
    let config = resolve_config(&args.data)?;
    let g = generator(config)?;
    let samples = g.generate(args.n, true)?;
    let manifest = pairgen::write_dataset(
        &samples,
        &args.out,
        WriteOptions {
            csv_sidecar: args.csv,
            plot: args.plot,
        },
    )?;
    run.finish(&args.out.join(RUN_MANIFEST), Some(g.config()), &[], &[&manifest])?;
    println!("wrote {} samples to {}", samples.len(), manifest.display());
    Ok(())
}

fn manifest_path(input: &Path) -> PathBuf {
    if input.is_dir() {
        input.join(MANIFEST_FILE)
    } else {
        input.to_path_buf()
    }
}

fn cmd_explain(args: ExplainArgs, run: &Run) -> CmdResult {
    let pool = match (args.method, &args.pool) {
        (Method::Retrieval, None) => return Err(usage("--method retrieval requires --pool")),
        (Method::Retrieval, Some(p)) => Some(RetrievalPool::load(p)?),
        _ => None,
    };
    let config = match &args.config {
        Some(p) => toml::from_str::<ExplainConfig>(&read_to_string(p)?)
            .map_err(|e| usage(format!("{}: {e}", p.display())))?,
        None => ExplainConfig::default(),
    };
    let manifest = manifest_path(&args.input);
    let dir = manifest.parent().map(Path::to_path_buf).unwrap_or_default();
    let entries = pairgen::read_manifest(&manifest)?;
    let explain_one = |e: &ManifestEntry| -> Result<(String, ExplanationList)> {
        let list = match args.method {
            Method::Oracle => e.ground_truth()?,
            Method::Lsq => {
                let (r, t) = e.series(&dir)?;
                explain::explain_lsq(&r, &t, &config)?
            }
            Method::Retrieval => {
                let (r, t) = e.series(&dir)?;
                explain::explain_retrieval(&r, &t, pool.as_ref().expect("checked"))?
            }
        };
        Ok((e.id.clone(), list))
    };
    let predictions = entries.par_iter().map(explain_one).collect::<Result<Vec<_>>>()?;
    ensure_parent(&args.out)?;
    write_atomic(&args.out, predictions_text(&predictions)?.as_bytes())?;
    let mut inputs = vec![manifest.as_path()];
    if let Some(p) = &args.pool {
        inputs.push(p);
    }
    run.finish(&sidecar_manifest(&args.out), None, &inputs, &[&args.out])?;
    println!("wrote {} predictions to {}", predictions.len(), args.out.display());
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs, run: &Run) -> CmdResult {
    let mode = if args.lenient { ParseMode::Lenient } else { ParseMode::Strict };
    let pred = evaluator::read_explanations(&args.pred, mode)?;
    let gt = evaluator::read_explanations(&args.gt, ParseMode::Strict)?;
    let report = evaluator::evaluate_dataset(&pred, &gt)?;
    let table = report.to_table();
    if let Some(out) = &args.out {
        fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
        let (json, txt) = (out.join("report.json"), out.join("report.txt"));
        write_atomic(&json, report.to_json().as_bytes())?;
        write_atomic(&txt, table.as_bytes())?;
        run.finish(&out.join(RUN_MANIFEST), None, &[&args.pred, &args.gt], &[&json, &txt])?;
    }
    print!("{table}");
    let acc = report.match_acc_overall.map_or_else(|| "-".to_string(), |v| format!("{v:.1}"));
    println!("match accuracy: {acc}");
    Ok(())
}

/// Explanation arrays found in a validate input, with a label and the
/// series length when known.
fn validation_units(text: &str) -> Result<Vec<(String, Value, Option<usize>)>> {
    let unit = |label: String, v: Value| -> Result<(String, Value, Option<usize>)> {
        if v.is_array() {
            return Ok((label, v, None));
        }
        let length = v.get("length").and_then(Value::as_u64).map(|n| n as usize);
        let label = match v.get("id").and_then(Value::as_str) {
            Some(id) => format!("{label} (id {id})"),
            None => label,
        };
        let list = v
            .get("explanation")
            .or_else(|| v.get("ground_truth"))
            .cloned()
            .ok_or_else(|| Error::Data(format!("{label}: no explanation array")))?;
        Ok((label, list, length))
    };
    match serde_json::from_str::<Value>(text) {
        Ok(v) => return Ok(vec![unit("input".into(), v)?]),
        // a single document spanning several lines: report its own position
        Err(e) if text.trim_start().starts_with('[') || text.trim().lines().nth(1).is_none() => {
            return Err(schema::syntax_error(&e));
        }
        Err(_) => {}
    }
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let v: Value = serde_json::from_str(line).map_err(|e| Error::Syntax {
            line: i + 1,
            column: e.column(),
            message: e.to_string(),
        })?;
        out.push(unit(format!("line {}", i + 1), v)?);
    }
    Ok(out)
}

fn cmd_validate(args: ValidateArgs) -> std::result::Result<bool, Failure> {
    let mode = if args.lenient { ParseMode::Lenient } else { ParseMode::Strict };
    let text = read_to_string(&args.input)?;
    let units = validation_units(&text)?;
    let (mut records, mut bad) = (0usize, 0usize);
    let mut report = String::new();
    for (label, value, length) in &units {
        let ins = schema::inspect_value(value, mode, *length);
        records += ins.records.len();
        for (idx, violations) in &ins.rejected {
            bad += 1;
            for v in violations {
                let _ = writeln!(report, "{label} record {idx}: {v}");
            }
        }
    }
    print!("{report}");
    println!("{records} records checked, {bad} invalid");
    Ok(bad == 0)
}

fn cmd_pool(args: PoolArgs, run: &Run) -> CmdResult {
    let config = resolve_config(&args.data)?;
    let g = generator(config)?;
    let pool = RetrievalPool::build(&g, args.n)?;
    ensure_parent(&args.out)?;
    pool.save(&args.out)?;
    run.finish(&sidecar_manifest(&args.out), Some(g.config()), &[], &[&args.out])?;
    println!("wrote {} pool entries to {}", pool.len(), args.out.display());
    Ok(())
}

fn cmd_schema(args: SchemaArgs) -> CmdResult {
    let mut text = serde_json::to_string_pretty(&schema::json_schema()).expect("schema serializes");
    text.push('\n');
    match args.out {
        Some(p) => {
            ensure_parent(&p)?;
            write_atomic(&p, text.as_bytes())?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

/// Runs the command line `args` (including the program name) and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let printable: Vec<String> = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    let run_of = |command| Run {
        command,
        args: printable.clone(),
        started: Instant::now(),
    };
    let outcome = match cli.command {
        Command::Generate(a) => cmd_generate(a, &run_of("generate")),
        Command::Explain(a) => cmd_explain(a, &run_of("explain")),
        Command::Evaluate(a) => cmd_evaluate(a, &run_of("evaluate")),
        Command::Pool(a) => cmd_pool(a, &run_of("pool")),
        Command::Schema(a) => cmd_schema(a),
        Command::Validate(a) => match cmd_validate(a) {
            Ok(true) => Ok(()),
            Ok(false) => return 1,
            Err(e) => Err(e),
        },
    };
    match outcome {
        Ok(()) => 0,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            2
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            1
        }
    }
}

/// Predictions keyed by id, as written by `explain`.
pub fn read_predictions(path: &Path) -> Result<BTreeMap<String, ExplanationList>> {
    evaluator::read_explanations(path, ParseMode::Strict)
}
