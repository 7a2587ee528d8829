//! Command-line workflow: generate, import, train, tag, smooth, rank, eval,
//! analyze, crossval, sweep and serve.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::analysis::{evaluate_scores, lexicalization, score_histogram, threshold_sweep};
use crate::corpus::{generate_synthetic_corpus, load_corpus, tokenize, Corpus, SyntheticSpec};
use crate::error::{Error, Result};
use crate::features::{
    load_contextual_features, load_embedding_table, FeatureSource, DEFAULT_WINDOW,
};
use crate::pipeline::cross_validate;
use crate::postprocess::{
    apply_postprocessing, estimate_transitions, gold_annotations, load_scores, smooth_scores,
    PostProcessSettings, ScoreSet, TransitionModel,
};
use crate::ranking::{rank_documents, spearman_rho, RankingMethod};
use crate::service::{self, Session};
use crate::tagger::{load_model, save_model, tag_corpus, train, TaggerConfig};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(
    name = "hare",
    version,
    about = "Token relevance tagging, post-processing and document ranking"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic labelled corpus and its embedding table.
    Generate(GenerateArgs),
    /// Tokenize plain-text files into a corpus file (one document per file).
    Import(ImportArgs),
    /// Train a tagger and print the training report.
    Train(TrainArgs),
    /// Score every token of a corpus with a trained model.
    Tag(TagArgs),
    /// Viterbi-smooth a score file.
    Smooth(SmoothArgs),
    /// Rank documents (CSV) and compare with the gold ranking.
    Rank(RankArgs),
    /// Token-level precision, recall and F-beta against gold (JSON).
    Eval(EvalArgs),
    /// Threshold sweep, lexicalization or score histogram (CSV).
    Analyze(AnalyzeArgs),
    /// K-fold cross-validation with out-of-fold scores.
    Crossval(CrossvalArgs),
    /// Exhaustive hyperparameter grid, one training run per cell (CSV).
    Sweep(SweepArgs),
    /// Serve corpora and score sets over HTTP.
    Serve(ServeArgs),
}

/// Where token features come from: `static:PATH` (embedding table) or
/// `contextual:PATH` (per-token layer vectors).
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureSpec {
    Static(PathBuf),
    Contextual(PathBuf),
}

impl FromStr for FeatureSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.split_once(':') {
            Some(("static", p)) if !p.is_empty() => Ok(FeatureSpec::Static(p.into())),
            Some(("contextual", p)) if !p.is_empty() => Ok(FeatureSpec::Contextual(p.into())),
            _ => Err(format!(
                "expected static:PATH or contextual:PATH, got {s:?}"
            )),
        }
    }
}

impl FeatureSpec {
    pub fn load(&self, corpus: &Corpus, window: usize) -> Result<FeatureSource> {
        Ok(match self {
            FeatureSpec::Static(p) => {
                FeatureSource::static_window(load_embedding_table(p)?, window)
            }
            FeatureSpec::Contextual(p) => {
                FeatureSource::contextual(load_contextual_features(p, corpus)?)
            }
        })
    }

    fn describe(&self) -> String {
        match self {
            FeatureSpec::Static(p) => format!("static:{}", p.display()),
            FeatureSpec::Contextual(p) => format!("contextual:{}", p.display()),
        }
    }
}

#[derive(Debug, Args)]
pub struct FeatureArgs {
    /// static:PATH or contextual:PATH
    #[arg(long)]
    pub features: FeatureSpec,
    /// Tokens on each side averaged into a static feature vector.
    #[arg(long, default_value_t = DEFAULT_WINDOW)]
    pub window: usize,
}

#[derive(Debug, Args)]
pub struct PostArgs {
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    /// Merge segments separated by at most this many tokens.
    #[arg(long, default_value_t = 0)]
    pub collapse: usize,
    /// Viterbi-smooth scores before binarizing.
    #[arg(long)]
    pub smooth: bool,
    /// Corpus with gold labels to estimate transitions from; defaults to
    /// the scored corpus.
    #[arg(long)]
    pub transitions_from: Option<PathBuf>,
}

impl PostArgs {
    fn settings(&self) -> Result<PostProcessSettings> {
        let s = PostProcessSettings {
            threshold: self.threshold,
            collapse_gap: self.collapse,
            smoothing: self.smooth,
        };
        s.validate()?;
        Ok(s)
    }

    fn transitions(&self, corpus: &Corpus) -> Result<Option<TransitionModel>> {
        if !self.smooth {
            return Ok(None);
        }
        transitions_for(self.transitions_from.as_deref(), corpus).map(Some)
    }
}

fn transitions_for(from: Option<&Path>, corpus: &Corpus) -> Result<TransitionModel> {
    match from {
        Some(p) => estimate_transitions(&load_corpus(p)?),
        None => {
            log::warn!("estimating transitions from the scored corpus's own gold labels");
            estimate_transitions(corpus)
        }
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Output directory; receives corpus.jsonl and embeddings.txt.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 50)]
    pub docs: usize,
    #[arg(long, default_value_t = 500)]
    pub tokens_per_doc: usize,
    #[arg(long, default_value_t = 0.18)]
    pub relevant_fraction: f64,
    #[arg(long, default_value_t = 1.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 13)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ImportArgs {
    /// Plain-text files; the file stem becomes the document id.
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Accepted for uniformity; tokenization draws no randomness.
    #[arg(long, default_value_t = 13)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[command(flatten)]
    pub features: FeatureArgs,
    /// key = value file over the default training configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the configuration's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Model file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the training report here (it always goes to stdout).
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TagArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    #[command(flatten)]
    pub features: FeatureArgs,
    /// Model id recorded in the score file; defaults to the model file stem.
    #[arg(long)]
    pub model_id: Option<String>,
    #[arg(long, default_value_t = 13)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SmoothArgs {
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub transitions_from: Option<PathBuf>,
    #[arg(long, default_value_t = 13)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub scores: PathBuf,
    #[command(flatten)]
    pub post: PostArgs,
    /// Ranking method for model scores.
    #[arg(long, alias = "model-method", default_value = "segtok")]
    pub method: RankingMethod,
    /// Ranking method for gold labels.
    #[arg(long, default_value = "segtok")]
    pub gold_method: RankingMethod,
    #[arg(long, default_value_t = 13)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub scores: PathBuf,
    #[command(flatten)]
    pub post: PostArgs,
    #[arg(long, default_value_t = 2.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 13)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum AnalysisKind {
    Sweep,
    Lexicalization,
    Histogram,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(value_enum)]
    pub kind: AnalysisKind,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub scores: PathBuf,
    /// Smooth scores before analysing.
    #[arg(long)]
    pub smooth: bool,
    #[arg(long)]
    pub transitions_from: Option<PathBuf>,
    /// Restrict to one document.
    #[arg(long)]
    pub document: Option<String>,
    #[arg(long, default_value_t = 2.0)]
    pub beta: f64,
    /// Sweep intervals; the sweep has grid + 1 rows.
    #[arg(long, default_value_t = 100)]
    pub grid: usize,
    #[arg(long, default_value_t = 1)]
    pub min_frequency: usize,
    #[arg(long)]
    pub case_fold: bool,
    #[arg(long, default_value_t = 20)]
    pub bins: usize,
    #[arg(long, default_value_t = 13)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CrossvalArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[command(flatten)]
    pub features: FeatureArgs,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 13)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    /// Output directory: raw.jsonl, smoothed.jsonl and report.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Grid file: one `key = v1 | v2 | ...` line per hyperparameter.
    #[arg(long)]
    pub grid: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    #[command(flatten)]
    pub features: FeatureArgs,
    /// Base configuration the grid overrides.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Corpus files; each is registered under its file stem.
    #[arg(long, required = true)]
    pub corpus: Vec<PathBuf>,
    /// Score files as CORPUS_ID=PATH; PATH alone attaches to the first corpus.
    #[arg(long)]
    pub scores: Vec<String>,
    /// Gold corpus to estimate transitions from, for corpora without gold.
    #[arg(long)]
    pub transitions_from: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
    #[arg(long, default_value_t = 13)]
    pub seed: u64,
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Import(a) => cmd_import(a),
        Command::Train(a) => cmd_train(a),
        Command::Tag(a) => cmd_tag(a),
        Command::Smooth(a) => cmd_smooth(a),
        Command::Rank(a) => cmd_rank(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Crossval(a) => cmd_crossval(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Serve(a) => cmd_serve(a),
    }
}

/// Entry point of the `hare` binary: parses arguments, runs, and maps
/// errors to a nonzero exit code.
pub fn main() -> std::process::ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            std::process::ExitCode::FAILURE
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// Writes `bytes` to `out`, or to stdout.
fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => {
            let mut w = create(p)?;
            w.write_all(bytes)
                .and_then(|_| w.flush())
                .map_err(|e| Error::io(p, e))
        }
        None => {
            // print! rather than a raw handle, so test harnesses capture it
            print!("{}", String::from_utf8_lossy(bytes));
            io::stdout().flush().map_err(|e| Error::io("<stdout>", e))
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("serializable");
    v.push(b'\n');
    v
}

/// Provenance block carried by every output file.
fn meta(command: &str, config: Value) -> Value {
    json!({ "tool": "hare", "version": VERSION, "command": command, "config": config })
}

/// `#`-prefixed header lines for CSV outputs.
fn csv_header(meta: &Value) -> String {
    format!("# {}\n", serde_json::to_string(meta).expect("serializable"))
}

fn csv_body(write_rows: impl FnOnce(&mut csv::Writer<&mut Vec<u8>>) -> csv::Result<()>) -> Vec<u8> {
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        write_rows(&mut w).expect("in-memory CSV");
        w.flush().expect("in-memory CSV");
    }
    buf
}

fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<TaggerConfig> {
    let mut config = match path {
        Some(p) => TaggerConfig::load(p)?,
        None => TaggerConfig::default(),
    };
    if let Some(s) = seed {
        config.seed = s;
    }
    config.validate()?;
    Ok(config)
}

fn config_value(config: &TaggerConfig) -> Value {
    serde_json::to_value(config).expect("serializable")
}

fn cmd_generate(a: GenerateArgs) -> Result<()> {
    let spec = SyntheticSpec {
        doc_count: a.docs,
        tokens_per_doc: a.tokens_per_doc,
        relevant_fraction: a.relevant_fraction,
        noise: a.noise,
        seed: a.seed,
        ..Default::default()
    };
    let (corpus, table) = generate_synthetic_corpus(&spec)?;
    fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    corpus.save(a.out.join("corpus.jsonl"))?;
    table.save(a.out.join("embeddings.txt"))?;
    let spec_meta = meta(
        "generate",
        serde_json::to_value(&spec).expect("serializable"),
    );
    emit(Some(&a.out.join("spec.json")), &to_json(&spec_meta))?;
    log::info!(
        "wrote {} documents, {} tokens, {} embeddings to {}",
        corpus.len(),
        corpus.token_count(),
        table.len(),
        a.out.display()
    );
    Ok(())
}

fn cmd_import(a: ImportArgs) -> Result<()> {
    let mut docs = Vec::with_capacity(a.files.len());
    for path in &a.files {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        docs.push(tokenize(&id, &text));
    }
    let name = a
        .out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Corpus::new(name, docs)?.save(&a.out)
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let corpus = load_corpus(&a.corpus)?;
    let features = a.features.features.load(&corpus, a.features.window)?;
    let config = load_config(a.config.as_deref(), a.seed)?;
    let (model, report) = train(&corpus, &features, &config)?;
    save_model(&model, &a.out)?;
    let body = json!({
        "meta": meta("train", json!({
            "corpus": a.corpus,
            "features": a.features.features.describe(),
            "window": a.features.window,
            "tagger": config_value(&config),
        })),
        "model": a.out,
        "report": report,
    });
    let bytes = to_json(&body);
    if let Some(p) = &a.report {
        emit(Some(p), &bytes)?;
    }
    emit(None, &bytes)
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "model".into())
}

fn write_scores(scores: &ScoreSet, meta: &Value, out: Option<&Path>) -> Result<()> {
    let mut buf = Vec::new();
    scores
        .write_jsonl(&mut buf, Some(meta))
        .map_err(|e| Error::io("<buffer>", e))?;
    emit(out, &buf)
}

fn cmd_tag(a: TagArgs) -> Result<()> {
    let corpus = load_corpus(&a.corpus)?;
    let features = a.features.features.load(&corpus, a.features.window)?;
    let model = load_model(&a.model)?;
    let model_id = a.model_id.unwrap_or_else(|| stem(&a.model));
    let scores = tag_corpus(&model, &corpus, &features, &model_id)?;
    let m = meta(
        "tag",
        json!({
            "model": a.model,
            "corpus": a.corpus,
            "features": a.features.features.describe(),
            "window": a.features.window,
            "seed": a.seed,
        }),
    );
    write_scores(&scores, &m, a.out.as_deref())
}

fn cmd_smooth(a: SmoothArgs) -> Result<()> {
    let corpus = load_corpus(&a.corpus)?;
    let scores = load_scores(&a.scores)?;
    scores.check_alignment(&corpus)?;
    let tm = transitions_for(a.transitions_from.as_deref(), &corpus)?;
    let smoothed = smooth_scores(&scores, &corpus, &tm)?;
    let m = meta(
        "smooth",
        json!({
            "scores": a.scores,
            "corpus": a.corpus,
            "transitions": tm,
            "seed": a.seed,
        }),
    );
    write_scores(&smoothed, &m, a.out.as_deref())
}

fn cmd_rank(a: RankArgs) -> Result<()> {
    let corpus = load_corpus(&a.corpus)?;
    let scores = load_scores(&a.scores)?;
    let settings = a.post.settings()?;
    let tm = a.post.transitions(&corpus)?;
    let ann = apply_postprocessing(&scores, &corpus, settings, tm.as_ref())?;
    let ranking = rank_documents(&corpus, &ann, a.method)?;
    let gold = if corpus.has_gold() {
        Some(rank_documents(
            &corpus,
            &gold_annotations(&corpus)?,
            a.gold_method,
        )?)
    } else {
        None
    };
    let rho = match &gold {
        Some(g) => Some(spearman_rho(g, &ranking)?),
        None => None,
    };
    let m = meta(
        "rank",
        json!({
            "corpus": a.corpus,
            "scores": a.scores,
            "method": a.method,
            "gold_method": a.gold_method,
            "settings": settings,
            "seed": a.seed,
            "spearman_rho": rho,
        }),
    );
    let body = csv_body(|w| {
        w.write_record(["rank", "id", "score", "segments", "gold_rank", "gold_score"])?;
        for e in &ranking.entries {
            let g = gold.as_ref().and_then(|g| g.get(&e.id));
            w.write_record([
                e.rank.to_string(),
                e.id.clone(),
                e.score.to_string(),
                ann.segments(&e.id).map_or(0, |s| s.len()).to_string(),
                g.map(|g| g.rank.to_string()).unwrap_or_default(),
                g.map(|g| g.score.to_string()).unwrap_or_default(),
            ])?;
        }
        Ok(())
    });
    let mut out = csv_header(&m).into_bytes();
    out.extend(body);
    emit(a.out.as_deref(), &out)?;
    if let Some(r) = rho {
        log::info!("spearman rho vs gold: {r:.4}");
    }
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let corpus = load_corpus(&a.corpus)?;
    let scores = load_scores(&a.scores)?;
    let settings = a.post.settings()?;
    let tm = a.post.transitions(&corpus)?;
    let ann = apply_postprocessing(&scores, &corpus, settings, tm.as_ref())?;
    let overall = evaluate_scores(&ann.scores, &corpus, settings.threshold, a.beta)?;
    let body = json!({
        "meta": meta("eval", json!({
            "corpus": a.corpus,
            "scores": a.scores,
            "settings": settings,
            "beta": a.beta,
            "seed": a.seed,
        })),
        "result": overall,
    });
    emit(a.out.as_deref(), &to_json(&body))
}

fn cmd_analyze(a: AnalyzeArgs) -> Result<()> {
    let corpus = load_corpus(&a.corpus)?;
    let mut scores = load_scores(&a.scores)?;
    scores.check_alignment(&corpus)?;
    if a.smooth {
        let tm = transitions_for(a.transitions_from.as_deref(), &corpus)?;
        scores = smooth_scores(&scores, &corpus, &tm)?;
    }
    let (scores, corpus) = match &a.document {
        Some(d) => {
            let s = scores
                .get(d)
                .ok_or_else(|| Error::UnknownDocument(d.clone()))?
                .to_vec();
            let mut one = ScoreSet::new(scores.model_id.clone());
            one.insert(d.clone(), s)?;
            let sub = corpus.subset(corpus.name(), |id| id == d);
            (one, sub)
        }
        None => (scores, corpus),
    };
    let m = meta(
        "analyze",
        json!({
            "kind": format!("{:?}", a.kind).to_lowercase(),
            "corpus": a.corpus,
            "scores": a.scores,
            "smooth": a.smooth,
            "document": a.document,
            "beta": a.beta,
            "grid": a.grid,
            "min_frequency": a.min_frequency,
            "case_fold": a.case_fold,
            "bins": a.bins,
            "seed": a.seed,
        }),
    );
    let body = match a.kind {
        AnalysisKind::Sweep => {
            let sweep = threshold_sweep(&scores, &corpus, a.beta, a.grid)?;
            log::info!(
                "best threshold {} (F {:.4})",
                sweep.best_threshold,
                sweep.best.f_beta
            );
            csv_body(|w| {
                w.write_record([
                    "threshold",
                    "precision",
                    "recall",
                    "f_beta",
                    "tp",
                    "fp",
                    "fn",
                    "best",
                ])?;
                for p in &sweep.points {
                    w.write_record([
                        p.threshold.to_string(),
                        p.result.precision.to_string(),
                        p.result.recall.to_string(),
                        p.result.f_beta.to_string(),
                        p.result.tp.to_string(),
                        p.result.fp.to_string(),
                        p.result.fn_.to_string(),
                        u8::from(p.threshold == sweep.best_threshold).to_string(),
                    ])?;
                }
                Ok(())
            })
        }
        AnalysisKind::Lexicalization => {
            let rep = lexicalization(&scores, &corpus, a.min_frequency, a.case_fold)?;
            csv_body(|w| {
                w.write_record(["token", "mean_score", "frequency"])?;
                for e in &rep.entries {
                    w.write_record([
                        e.token.clone(),
                        e.mean_score.to_string(),
                        e.frequency.to_string(),
                    ])?;
                }
                Ok(())
            })
        }
        AnalysisKind::Histogram => {
            let h = score_histogram(scores.all_scores(), a.bins)?;
            csv_body(|w| {
                w.write_record(["lower", "upper", "count"])?;
                for (i, c) in h.counts.iter().enumerate() {
                    w.write_record([
                        h.edges[i].to_string(),
                        h.edges[i + 1].to_string(),
                        c.to_string(),
                    ])?;
                }
                Ok(())
            })
        }
    };
    let mut out = csv_header(&m).into_bytes();
    out.extend(body);
    emit(a.out.as_deref(), &out)
}

fn cmd_crossval(a: CrossvalArgs) -> Result<()> {
    let corpus = load_corpus(&a.corpus)?;
    let features = a.features.features.load(&corpus, a.features.window)?;
    let config = load_config(a.config.as_deref(), None)?;
    let cv = cross_validate(
        &corpus,
        &features,
        &config,
        a.folds,
        a.seed,
        a.threshold,
        "crossval",
    )?;
    let m = meta(
        "crossval",
        json!({
            "corpus": a.corpus,
            "features": a.features.features.describe(),
            "window": a.features.window,
            "folds": a.folds,
            "seed": a.seed,
            "threshold": a.threshold,
            "tagger": config_value(&config),
        }),
    );
    fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    write_scores(&cv.raw, &m, Some(&a.out.join("raw.jsonl")))?;
    write_scores(&cv.smoothed, &m, Some(&a.out.join("smoothed.jsonl")))?;
    let report = json!({
        "meta": m,
        "macro_raw": cv.macro_raw,
        "macro_smoothed": cv.macro_smoothed,
        "folds": cv.folds,
    });
    emit(Some(&a.out.join("report.json")), &to_json(&report))?;
    log::info!(
        "macro F {:.4} raw, {:.4} smoothed",
        cv.macro_raw.f_beta,
        cv.macro_smoothed.f_beta
    );
    Ok(())
}

/// One hyperparameter axis of a sweep grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridAxis {
    pub key: String,
    pub values: Vec<String>,
}

/// Keys a grid may vary: every training option plus the static window.
pub fn grid_keys() -> Vec<&'static str> {
    let mut keys = TaggerConfig::KEYS.to_vec();
    keys.push("window");
    keys
}

/// Parses `key = v1 | v2` lines. `#` starts a comment.
pub fn parse_grid(text: &str) -> Result<Vec<GridAxis>> {
    let valid = grid_keys();
    let mut axes: Vec<GridAxis> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, values) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("grid line {}: expected key = v1 | v2", i + 1)))?;
        let key = key.trim();
        if !valid.contains(&key) {
            return Err(Error::Config(format!(
                "unknown hyperparameter {key:?}; valid keys: {}",
                valid.join(", ")
            )));
        }
        if axes.iter().any(|a| a.key == key) {
            return Err(Error::Config(format!(
                "grid line {}: {key} listed twice",
                i + 1
            )));
        }
        let values: Vec<String> = values
            .split('|')
            .map(|v| v.trim().to_owned())
            .filter(|v| !v.is_empty())
            .collect();
        if values.is_empty() {
            return Err(Error::Config(format!(
                "grid line {}: no values for {key}",
                i + 1
            )));
        }
        axes.push(GridAxis {
            key: key.to_owned(),
            values,
        });
    }
    if axes.is_empty() {
        return Err(Error::Config("empty grid".into()));
    }
    Ok(axes)
}

/// Every combination of axis values, first axis varying slowest.
pub fn grid_cells(axes: &[GridAxis]) -> Vec<Vec<(String, String)>> {
    let mut cells: Vec<Vec<(String, String)>> = vec![Vec::new()];
    for axis in axes {
        cells = cells
            .into_iter()
            .flat_map(|cell| {
                axis.values.iter().map(move |v| {
                    let mut c = cell.clone();
                    c.push((axis.key.clone(), v.clone()));
                    c
                })
            })
            .collect();
    }
    cells
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub cell: usize,
    pub values: Vec<(String, String)>,
    pub dev_f_beta: f64,
    pub best_epoch: usize,
    pub epochs_run: usize,
}

/// Trains one model per grid cell and reports its best dev F-beta.
/// Cells run in parallel; each is deterministic for its configuration.
pub fn run_sweep(
    axes: &[GridAxis],
    corpus: &Corpus,
    features: &FeatureSpec,
    base: &TaggerConfig,
    base_window: usize,
) -> Result<Vec<SweepRow>> {
    let cells = grid_cells(axes);
    // load once, then re-window per cell
    let source = features.load(corpus, base_window)?;
    cells
        .into_par_iter()
        .enumerate()
        .map(|(i, values)| {
            let mut config = base.clone();
            let mut window = base_window;
            for (k, v) in &values {
                if k == "window" {
                    window = v
                        .parse()
                        .map_err(|e| Error::Config(format!("window = {v}: {e}")))?;
                } else {
                    config.set(k, v)?;
                }
            }
            config.validate()?;
            let cell_features = match &source {
                FeatureSource::Static { table, .. } => {
                    FeatureSource::static_window(table.clone(), window)
                }
                other => other.clone(),
            };
            let (_, report) = train(corpus, &cell_features, &config)?;
            log::info!("cell {i}: {values:?} dev F {:.4}", report.best_dev_f_beta);
            Ok(SweepRow {
                cell: i,
                values,
                dev_f_beta: report.best_dev_f_beta,
                best_epoch: report.best_epoch,
                epochs_run: report.stopping_epoch,
            })
        })
        .collect()
}

fn cmd_sweep(a: SweepArgs) -> Result<()> {
    let text = fs::read_to_string(&a.grid).map_err(|e| Error::io(&a.grid, e))?;
    let axes = parse_grid(&text)?;
    let corpus = load_corpus(&a.corpus)?;
    let base = load_config(a.config.as_deref(), a.seed)?;
    let rows = run_sweep(
        &axes,
        &corpus,
        &a.features.features,
        &base,
        a.features.window,
    )?;
    let m = meta(
        "sweep",
        json!({
            "corpus": a.corpus,
            "features": a.features.features.describe(),
            "window": a.features.window,
            "grid": axes.iter().map(|ax| json!({ "key": ax.key, "values": ax.values })).collect::<Vec<_>>(),
            "tagger": config_value(&base),
        }),
    );
    let body = csv_body(|w| {
        let mut header = vec!["cell".to_owned()];
        header.extend(axes.iter().map(|ax| ax.key.clone()));
        header.extend(["dev_f_beta", "best_epoch", "epochs_run"].map(String::from));
        w.write_record(&header)?;
        for r in &rows {
            let mut rec = vec![r.cell.to_string()];
            rec.extend(r.values.iter().map(|(_, v)| v.clone()));
            rec.extend([
                r.dev_f_beta.to_string(),
                r.best_epoch.to_string(),
                r.epochs_run.to_string(),
            ]);
            w.write_record(&rec)?;
        }
        Ok(())
    });
    let mut out = csv_header(&m).into_bytes();
    out.extend(body);
    emit(a.out.as_deref(), &out)
}

fn cmd_serve(a: ServeArgs) -> Result<()> {
    let mut session = Session::new();
    let mut ids = Vec::new();
    let api = |e: service::ApiError| Error::InvalidArgument(e.message);
    for path in &a.corpus {
        let mut corpus = load_corpus(path)?;
        if corpus.name().is_empty() {
            corpus = Corpus::new(stem(path), corpus.documents().to_vec())?;
        }
        let id = session.add_corpus(corpus).map_err(api)?;
        if let Some(from) = &a.transitions_from {
            if session.corpus(&id).is_some_and(|c| !c.has_gold()) {
                session
                    .set_transitions(&id, estimate_transitions(&load_corpus(from)?)?)
                    .map_err(api)?;
            }
        }
        ids.push(id);
    }
    for spec in &a.scores {
        let (corpus_id, path) = match spec.split_once('=') {
            Some((c, p)) => (c.to_owned(), PathBuf::from(p)),
            None => (ids[0].clone(), PathBuf::from(spec)),
        };
        session
            .add_scoreset(&corpus_id, load_scores(&path)?)
            .map_err(api)?;
    }
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Error::io("<runtime>", e))?;
    runtime
        .block_on(service::serve(a.addr, session.into_shared()))
        .map_err(|e| Error::io(a.addr.to_string(), e))
}
