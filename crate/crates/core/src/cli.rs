//! Command-line front end.
//!
//! Every command loads and validates all of its inputs before computing
//! anything, and writes its outputs only after everything has succeeded.
//!
//! Exit codes: 0 success, 1 output failure, 2 unparseable input, 3 missing
//! gold label, 4 bad configuration, 5 threshold/score kind mismatch,
//! 6 id mismatch between files.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::conformal::{calibrate, check_alpha, CalibratedThreshold, DEFAULT_ALPHA};
use crate::decode::{decode_batch, document_level, ensemble_average, ensemble_vote, Decoder};
use crate::error::Error;
use crate::io::{
    self, parse_predictions_csv, predictions_csv, probability_csv, read_probability_file, read_text, IoError,
    OutputBundle, PredictionRow,
};
use crate::metrics::{alpha_sweep, evaluate, stratified_split, CoarseMaps, EvaluationInput, DEFAULT_ALPHA_GRID};
use crate::scores::{ScoreKind, DEFAULT_LAMBDA};
use crate::synth::{generate, generate_with_counts, SyntheticConfig, DEV_CLASS_COUNTS};
use crate::types::{Example, Label, LabelSpace, LabeledBatch, PredictionSet};

pub const EXIT_OUTPUT: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_MISSING_GOLD: i32 = 3;
pub const EXIT_CONFIG: i32 = 4;
pub const EXIT_KIND_MISMATCH: i32 = 5;
pub const EXIT_ID_MISMATCH: i32 = 6;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    fn config(message: impl Into<String>) -> Self {
        Self::new(EXIT_CONFIG, message)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        let code = match e {
            IoError::Write { .. } => EXIT_OUTPUT,
            _ => EXIT_PARSE,
        };
        CliError::new(code, e.to_string())
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::MissingGold { .. } => EXIT_MISSING_GOLD,
            Error::InvalidAlpha(_)
            | Error::InvalidLambda(_)
            | Error::InvalidFraction(_)
            | Error::UnknownScore(_)
            | Error::TooFewLabels(_) => EXIT_CONFIG,
            Error::DuplicateId(_) => EXIT_ID_MISMATCH,
            _ => EXIT_PARSE,
        };
        CliError::new(code, e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default)]
pub enum Ensemble {
    #[default]
    None,
    /// Average aligned probability rows, then run one pipeline.
    Average,
    /// Run one pipeline per input and vote on the decoded labels.
    Vote,
}

/// Options shared by every command.
#[derive(Debug, Clone, Args)]
pub struct RunConfig {
    /// Nonconformity score: naive, aps or raps. Defaults to aps; `sweep`
    /// runs all three unless one is given.
    #[arg(long)]
    pub score: Option<String>,
    /// RAPS rank penalty.
    #[arg(long, default_value_t = DEFAULT_LAMBDA)]
    pub lambda: f64,
    /// Target miscoverage rate.
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    /// Number of ordered labels.
    #[arg(long, default_value_t = LabelSpace::DEFAULT_K)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// JSON file with acc7 / acc5 / acc3 label maps; defaults to the shipped
    /// placeholder maps.
    #[arg(long)]
    pub coarse_maps: Option<PathBuf>,
    #[arg(long, default_value_t = Decoder::CpMean)]
    pub decoder: Decoder,
    #[arg(long, value_enum, default_value_t = Ensemble::None)]
    pub ensemble: Ensemble,
    /// Also write renormalized in-set weights next to the predictions.
    #[arg(long)]
    pub emit_weights: bool,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            score: None,
            lambda: DEFAULT_LAMBDA,
            alpha: DEFAULT_ALPHA,
            k: LabelSpace::DEFAULT_K,
            seed: 0,
            coarse_maps: None,
            decoder: Decoder::CpMean,
            ensemble: Ensemble::None,
            emit_weights: false,
            out: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn space(&self) -> CliResult<LabelSpace> {
        Ok(LabelSpace::new(self.k)?)
    }

    pub fn kind(&self) -> CliResult<ScoreKind> {
        Ok(ScoreKind::from_name(
            self.score.as_deref().unwrap_or("aps"),
            self.lambda,
        )?)
    }

    fn kinds(&self) -> CliResult<Vec<ScoreKind>> {
        match &self.score {
            Some(_) => Ok(vec![self.kind()?]),
            None => {
                let raps = ScoreKind::raps(self.lambda)?;
                Ok(vec![ScoreKind::Naive, ScoreKind::Aps, raps])
            }
        }
    }

    fn coarse_maps(&self) -> CliResult<CoarseMaps> {
        match &self.coarse_maps {
            Some(path) => {
                let text = read_text(path)?;
                CoarseMaps::from_json(&text).map_err(|e| CliError::new(EXIT_PARSE, format!("{}: {e}", path.display())))
            }
            None => Ok(CoarseMaps::shipped()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "ordinal-cp",
    version,
    about = "Conformal prediction sets and ordinal decoding for K-level classifiers"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Stratified split of a labeled file into dev-cal and dev-tune halves.
    Split(SplitArgs),
    /// Fit the conformal threshold on a calibration file.
    Calibrate(CalibrateArgs),
    /// Build prediction sets and decode a label per row.
    Predict(PredictArgs),
    /// Score a predictions file against gold labels.
    Evaluate(EvaluateArgs),
    /// Coverage, set size and QWK across miscoverage rates.
    Sweep(SweepArgs),
    /// Write a synthetic probability file.
    GenFixture(GenFixtureArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Share of each class sent to dev-cal.
    #[arg(long)]
    pub fraction: f64,
    #[command(flatten)]
    pub config: RunConfig,
}

#[derive(Debug, Clone, Args)]
pub struct CalibrateArgs {
    /// Calibration file; repeat for ensembles.
    #[arg(long = "input", required = true)]
    pub inputs: Vec<PathBuf>,
    #[command(flatten)]
    pub config: RunConfig,
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    /// Threshold file; repeat once per input for `--ensemble vote`.
    #[arg(long = "threshold", required = true)]
    pub thresholds: Vec<PathBuf>,
    /// Probability file; repeat for ensembles.
    #[arg(long = "input", required = true)]
    pub inputs: Vec<PathBuf>,
    #[command(flatten)]
    pub config: RunConfig,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub predictions: PathBuf,
    /// Probability file carrying gold labels (and optional groups).
    #[arg(long)]
    pub gold: PathBuf,
    #[command(flatten)]
    pub config: RunConfig,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub cal: PathBuf,
    #[arg(long)]
    pub tune: PathBuf,
    /// Comma-separated miscoverage rates.
    #[arg(long, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,
    #[command(flatten)]
    pub config: RunConfig,
}

#[derive(Debug, Clone, Args)]
pub struct GenFixtureArgs {
    /// Number of rows; ignored with `--dev-counts`.
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    /// Use the exact per-level counts of the 7310-row development set.
    #[arg(long)]
    pub dev_counts: bool,
    /// Round probabilities to this many decimals.
    #[arg(long)]
    pub decimals: Option<usize>,
    #[arg(long, default_value = "synthetic.csv")]
    pub name: String,
    #[arg(long, default_value = "s")]
    pub prefix: String,
    #[command(flatten)]
    pub config: RunConfig,
}

/// Outcome of a command: files to write plus human-readable summary lines.
#[derive(Debug, Default)]
pub struct Outcome {
    pub files: OutputBundle,
    pub summary: Vec<String>,
}

fn missing_gold_check(batch: &LabeledBatch) -> CliResult<()> {
    batch.golds().map(|_| ()).map_err(CliError::from)
}

#[derive(Serialize)]
struct SplitManifest {
    fraction: f64,
    seed: u64,
    classes: Vec<ManifestRow>,
    total: ManifestRow,
}

#[derive(Serialize)]
struct ManifestRow {
    #[serde(skip_serializing_if = "Option::is_none")]
    class: Option<Label>,
    original: usize,
    dev_cal: usize,
    dev_tune: usize,
}

pub fn cmd_split(args: &SplitArgs) -> CliResult<Outcome> {
    let space = args.config.space()?;
    if !(args.fraction > 0.0 && args.fraction < 1.0) {
        return Err(CliError::config(format!(
            "fraction must lie in (0, 1), got {}",
            args.fraction
        )));
    }
    let batch = read_probability_file(&args.input, space)?;
    missing_gold_check(&batch)?;
    let split = stratified_split(&batch, args.fraction, args.config.seed)?;

    let classes: Vec<ManifestRow> = split
        .counts
        .iter()
        .map(|c| ManifestRow {
            class: Some(c.class),
            original: c.original,
            dev_cal: c.first,
            dev_tune: c.second,
        })
        .collect();
    let total = ManifestRow {
        class: None,
        original: batch.len(),
        dev_cal: split.first.len(),
        dev_tune: split.second.len(),
    };
    let summary = vec![format!(
        "split {} rows into dev-cal {} / dev-tune {}",
        total.original, total.dev_cal, total.dev_tune
    )];
    let manifest = SplitManifest {
        fraction: args.fraction,
        seed: args.config.seed,
        classes,
        total,
    };
    let mut files = OutputBundle::default();
    files.add("dev-cal.csv", probability_csv(&split.first, None));
    files.add("dev-tune.csv", probability_csv(&split.second, None));
    files.add("split_manifest.json", to_json(&manifest));
    Ok(Outcome { files, summary })
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializes");
    s.push('\n');
    s
}

fn read_all(paths: &[PathBuf], space: LabelSpace) -> CliResult<Vec<LabeledBatch>> {
    paths
        .iter()
        .map(|p| read_probability_file(p, space).map_err(CliError::from))
        .collect()
}

/// Averages rows with equal ids across several files. Metadata comes from
/// the first file, whose row order is kept.
pub fn average_batches(batches: &[LabeledBatch]) -> CliResult<LabeledBatch> {
    let first = batches.first().ok_or_else(|| CliError::config("no input files"))?;
    check_same_ids(batches)?;
    let index: Vec<HashMap<&str, &Example>> = batches
        .iter()
        .map(|b| b.iter().map(|e| (e.id.as_str(), e)).collect())
        .collect();
    let examples = first
        .iter()
        .map(|ex| {
            let rows: Vec<_> = index.iter().map(|m| m[ex.id.as_str()].probs.clone()).collect();
            Ok(Example {
                probs: ensemble_average(&rows)?,
                ..ex.clone()
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(LabeledBatch::new(examples, first.space())?)
}

fn check_same_ids(batches: &[LabeledBatch]) -> CliResult<()> {
    let Some(first) = batches.first() else {
        return Ok(());
    };
    let ids: BTreeSet<&str> = first.iter().map(|e| e.id.as_str()).collect();
    for (i, b) in batches.iter().enumerate().skip(1) {
        let other: BTreeSet<&str> = b.iter().map(|e| e.id.as_str()).collect();
        if other != ids {
            let missing = ids.symmetric_difference(&other).next().copied().unwrap_or_default();
            return Err(CliError::new(
                EXIT_ID_MISMATCH,
                format!("input {} does not share ids with input 1 (e.g. {missing:?})", i + 1),
            ));
        }
    }
    Ok(())
}

pub fn cmd_calibrate(args: &CalibrateArgs) -> CliResult<Outcome> {
    let cfg = &args.config;
    let kind = cfg.kind()?;
    check_alpha(cfg.alpha)?;
    let space = cfg.space()?;
    if cfg.ensemble == Ensemble::None && args.inputs.len() != 1 {
        return Err(CliError::config("several inputs need --ensemble average or vote"));
    }
    let batches = read_all(&args.inputs, space)?;
    for b in &batches {
        missing_gold_check(b)?;
        if b.is_empty() {
            return Err(CliError::new(EXIT_PARSE, "calibration file has no rows"));
        }
    }

    let mut files = OutputBundle::default();
    let mut summary = Vec::new();
    let mut emit = |name: String, t: CalibratedThreshold| {
        summary.push(format!(
            "{name}: {} alpha={} n={} tau_hat={}",
            t.kind,
            t.alpha,
            t.n,
            t.tau_hat.map_or("inf".to_string(), |v| v.to_string())
        ));
        files.add(name, t.to_json());
    };
    match cfg.ensemble {
        Ensemble::None => emit("threshold.json".into(), calibrate(&batches[0], kind, cfg.alpha)?),
        Ensemble::Average => {
            let avg = average_batches(&batches)?;
            emit("threshold.json".into(), calibrate(&avg, kind, cfg.alpha)?);
        }
        Ensemble::Vote => {
            for (i, b) in batches.iter().enumerate() {
                emit(format!("threshold-{}.json", i + 1), calibrate(b, kind, cfg.alpha)?);
            }
        }
    }
    Ok(Outcome { files, summary })
}

fn read_threshold(path: &Path) -> CliResult<CalibratedThreshold> {
    let text = read_text(path)?;
    CalibratedThreshold::from_json(&text).map_err(|e| CliError::new(EXIT_PARSE, format!("{}: {e}", path.display())))
}

struct Predicted {
    rows: Vec<PredictionRow>,
    weights: Vec<(String, Vec<Label>, Vec<f64>)>,
    docs: Vec<(String, Label)>,
}

fn predict_single(tau: &CalibratedThreshold, batch: &LabeledBatch, decoder: Decoder) -> CliResult<Predicted> {
    let decoded = decode_batch(tau, batch, decoder)?;
    let mut out = Predicted {
        rows: Vec::with_capacity(decoded.len()),
        weights: Vec::with_capacity(decoded.len()),
        docs: Vec::new(),
    };
    for (d, ex) in decoded.iter().zip(batch) {
        out.rows.push(PredictionRow::from(d));
        out.weights
            .push((d.id.clone(), d.set.members().to_vec(), d.set.weights().to_vec()));
        if let Some(doc) = &ex.doc_id {
            out.docs.push((doc.clone(), d.point));
        }
    }
    Ok(out)
}

/// Votes per row across models; the reported set is the union of the model
/// sets, weighted by the averaged posterior.
fn predict_vote(taus: &[CalibratedThreshold], batches: &[LabeledBatch], decoder: Decoder) -> CliResult<Predicted> {
    let per_model: Vec<HashMap<String, (crate::decode::DecodedExample, &Example)>> = taus
        .iter()
        .zip(batches)
        .map(|(tau, b)| {
            Ok(decode_batch(tau, b, decoder)?
                .into_iter()
                .zip(b.iter())
                .map(|(d, e)| (d.id.clone(), (d, e)))
                .collect())
        })
        .collect::<CliResult<_>>()?;

    let mut out = Predicted {
        rows: Vec::new(),
        weights: Vec::new(),
        docs: Vec::new(),
    };
    for ex in &batches[0] {
        let entries: Vec<_> = per_model.iter().map(|m| &m[&ex.id]).collect();
        let points: Vec<Label> = entries.iter().map(|(d, _)| d.point).collect();
        let baselines: Vec<Label> = entries.iter().map(|(d, _)| d.baseline_point).collect();
        let posteriors: Vec<_> = entries.iter().map(|(_, e)| e.probs.clone()).collect();
        let union: BTreeSet<Label> = entries
            .iter()
            .flat_map(|(d, _)| d.set.members().iter().copied())
            .collect();
        let set = PredictionSet::from_posterior(union, &ensemble_average(&posteriors)?)?;
        let point = ensemble_vote(&points)?;
        out.rows.push(PredictionRow {
            id: ex.id.clone(),
            pred: point,
            baseline: ensemble_vote(&baselines)?,
            set: set.members().to_vec(),
        });
        out.weights
            .push((ex.id.clone(), set.members().to_vec(), set.weights().to_vec()));
        if let Some(doc) = &ex.doc_id {
            out.docs.push((doc.clone(), point));
        }
    }
    Ok(out)
}

pub fn cmd_predict(args: &PredictArgs) -> CliResult<Outcome> {
    let cfg = &args.config;
    let kind = cfg.kind()?;
    let space = cfg.space()?;
    match cfg.ensemble {
        Ensemble::None if args.inputs.len() != 1 || args.thresholds.len() != 1 => {
            return Err(CliError::config(
                "exactly one --input and one --threshold without --ensemble",
            ));
        }
        Ensemble::Average if args.thresholds.len() != 1 => {
            return Err(CliError::config("--ensemble average takes one threshold"));
        }
        Ensemble::Vote if args.thresholds.len() != args.inputs.len() => {
            return Err(CliError::config("--ensemble vote needs one threshold per input"));
        }
        _ => {}
    }
    let taus = args
        .thresholds
        .iter()
        .map(|p| read_threshold(p))
        .collect::<CliResult<Vec<_>>>()?;
    for (tau, path) in taus.iter().zip(&args.thresholds) {
        if tau.kind != kind {
            return Err(CliError::new(
                EXIT_KIND_MISMATCH,
                format!(
                    "{} was fitted with {} but the run uses {}",
                    path.display(),
                    tau.kind,
                    kind
                ),
            ));
        }
    }
    let batches = read_all(&args.inputs, space)?;
    check_same_ids(&batches)?;
    if cfg.decoder == Decoder::Oracle && batches.iter().any(|b| b.golds().is_err()) {
        return Err(CliError::config(
            "the oracle decoder needs gold labels for every row and is only meant for evaluation",
        ));
    }

    let predicted = match cfg.ensemble {
        Ensemble::None => predict_single(&taus[0], &batches[0], cfg.decoder)?,
        Ensemble::Average => predict_single(&taus[0], &average_batches(&batches)?, cfg.decoder)?,
        Ensemble::Vote => predict_vote(&taus, &batches, cfg.decoder)?,
    };

    let mut files = OutputBundle::default();
    files.add("predictions.csv", predictions_csv(&predicted.rows));
    if cfg.emit_weights {
        files.add("weights.jsonl", io::weights_jsonl(&predicted.weights));
    }
    let mut summary = vec![format!("decoded {} rows with {}", predicted.rows.len(), cfg.decoder)];
    if !predicted.docs.is_empty() {
        let docs = document_level(&predicted.docs)?;
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["doc_id", "pred"]).expect("in-memory write");
        for (doc, label) in &docs {
            w.write_record([doc.as_str(), &label.to_string()])
                .expect("in-memory write");
        }
        files.add("doc_predictions.csv", w.into_inner().expect("flush"));
        summary.push(format!("aggregated {} documents", docs.len()));
    }
    Ok(Outcome { files, summary })
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> CliResult<Outcome> {
    let cfg = &args.config;
    let space = cfg.space()?;
    let maps = cfg.coarse_maps()?;
    let pred_text = read_text(&args.predictions)?;
    let rows = parse_predictions_csv(&pred_text, &args.predictions, space)?;
    let gold = read_probability_file(&args.gold, space)?;
    missing_gold_check(&gold)?;

    let mut by_id: HashMap<&str, &PredictionRow> = HashMap::with_capacity(rows.len());
    for r in &rows {
        if by_id.insert(r.id.as_str(), r).is_some() {
            return Err(CliError::new(
                EXIT_ID_MISMATCH,
                format!("prediction id {:?} repeated", r.id),
            ));
        }
    }
    if rows.len() != gold.len() {
        return Err(CliError::new(
            EXIT_ID_MISMATCH,
            format!("{} predictions for {} gold rows", rows.len(), gold.len()),
        ));
    }
    let mut input = EvaluationInput {
        k: space.k(),
        golds: Vec::with_capacity(gold.len()),
        preds: Vec::with_capacity(gold.len()),
        baseline: Vec::with_capacity(gold.len()),
        sets: Vec::with_capacity(gold.len()),
        groups: Vec::with_capacity(gold.len()),
    };
    for ex in &gold {
        let row = by_id
            .get(ex.id.as_str())
            .ok_or_else(|| CliError::new(EXIT_ID_MISMATCH, format!("no prediction for id {:?}", ex.id)))?;
        input.golds.push(ex.require_gold()?);
        input.preds.push(row.pred);
        input.baseline.push(row.baseline);
        input
            .sets
            .push(PredictionSet::from_posterior(row.set.iter().copied(), &ex.probs)?);
        input.groups.push(ex.groups.clone());
    }
    let report = evaluate(&input, &maps)?;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["metric", "value"]).expect("in-memory write");
    for (metric, value) in report.csv_rows() {
        w.write_record([metric, value]).expect("in-memory write");
    }
    let mut files = OutputBundle::default();
    files.add("report.json", to_json(&report));
    files.add("report.csv", w.into_inner().expect("flush"));
    let summary = vec![format!(
        "n={} qwk={:.4} acc={:.4} adj_acc={:.4} dist={:.4} coverage={:.4} avg_set_size={:.3}",
        report.n, report.qwk, report.acc, report.adj_acc, report.dist, report.coverage, report.avg_set_size
    )];
    Ok(Outcome { files, summary })
}

pub fn cmd_sweep(args: &SweepArgs) -> CliResult<Outcome> {
    let cfg = &args.config;
    let kinds = cfg.kinds()?;
    let alphas = args.alphas.clone().unwrap_or_else(|| DEFAULT_ALPHA_GRID.to_vec());
    if alphas.is_empty() {
        return Err(CliError::config("empty alpha grid"));
    }
    for &a in &alphas {
        check_alpha(a)?;
    }
    let space = cfg.space()?;
    let cal = read_probability_file(&args.cal, space)?;
    let tune = read_probability_file(&args.tune, space)?;
    missing_gold_check(&cal)?;
    missing_gold_check(&tune)?;
    let rows = alpha_sweep(&cal, &tune, &kinds, &alphas)?;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["kind", "alpha", "qwk", "coverage", "avg_set_size"])
        .expect("in-memory write");
    for r in &rows {
        w.write_record([
            r.kind.name().to_string(),
            r.alpha.to_string(),
            r.qwk.to_string(),
            r.coverage.to_string(),
            r.avg_set_size.to_string(),
        ])
        .expect("in-memory write");
    }
    let mut files = OutputBundle::default();
    files.add("sweep.csv", w.into_inner().expect("flush"));
    files.add("sweep.json", to_json(&rows));
    Ok(Outcome {
        files,
        summary: vec![format!("{} sweep cells", rows.len())],
    })
}

pub fn cmd_gen_fixture(args: &GenFixtureArgs) -> CliResult<Outcome> {
    let cfg = &args.config;
    let space = cfg.space()?;
    let mut synth = SyntheticConfig::default();
    if space.k() != synth.space.k() {
        synth.space = space;
        synth.class_weights = vec![1.0; space.k()];
    }
    let batch = if args.dev_counts {
        if space.k() != DEV_CLASS_COUNTS.len() {
            return Err(CliError::config("--dev-counts needs --k 19"));
        }
        generate_with_counts(&synth, &DEV_CLASS_COUNTS, cfg.seed, &args.prefix)?
    } else {
        generate(&synth, args.n, cfg.seed, &args.prefix)?
    };
    let mut files = OutputBundle::default();
    files.add(args.name.clone(), probability_csv(&batch, args.decimals));
    Ok(Outcome {
        files,
        summary: vec![format!("generated {} rows", batch.len())],
    })
}

impl Command {
    fn out_dir(&self) -> &Path {
        match self {
            Command::Split(a) => &a.config.out,
            Command::Calibrate(a) => &a.config.out,
            Command::Predict(a) => &a.config.out,
            Command::Evaluate(a) => &a.config.out,
            Command::Sweep(a) => &a.config.out,
            Command::GenFixture(a) => &a.config.out,
        }
    }

    pub fn execute(&self) -> CliResult<Outcome> {
        match self {
            Command::Split(a) => cmd_split(a),
            Command::Calibrate(a) => cmd_calibrate(a),
            Command::Predict(a) => cmd_predict(a),
            Command::Evaluate(a) => cmd_evaluate(a),
            Command::Sweep(a) => cmd_sweep(a),
            Command::GenFixture(a) => cmd_gen_fixture(a),
        }
    }

    /// Executes the command and commits its outputs. Returns the written
    /// paths and summary lines.
    pub fn run(&self) -> CliResult<(Vec<PathBuf>, Vec<String>)> {
        let outcome = self.execute()?;
        let written = outcome.files.commit(self.out_dir())?;
        Ok((written, outcome.summary))
    }
}

/// Parses `argv` and runs; returns the process exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match cli.command.run() {
        Ok((written, summary)) => {
            for line in summary {
                println!("{line}");
            }
            for path in written {
                println!("wrote {}", path.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}
