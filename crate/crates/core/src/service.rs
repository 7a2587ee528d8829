//! HTTP+JSON application server over an in-memory session of corpora and
//! score sets.
//!
//! Post-processing settings travel with each request; the only mutations
//! are uploads. Reads share a read lock, uploads take the write lock.

use std::collections::HashMap;
use std::io::Cursor;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex, RwLock};

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use indexmap::IndexMap;
use serde::Serialize;

use crate::analysis::{
    evaluate, lexicalization, score_histogram, threshold_sweep, EvalResult, LexicalizationReport,
    ScoreHistogram, ThresholdSweep,
};
use crate::corpus::Corpus;
use crate::error::Error;
use crate::postprocess::{
    estimate_transitions, gold_annotations, segment_scores, smooth_scores, PostProcessSettings,
    PostProcessed, ScoreSet, Segment, TransitionModel,
};
use crate::ranking::{
    rank_documents, ranking_method_matrix, spearman_rho, RankingMethod, RankingResult,
};

/// Model id under which a corpus's gold labels are exposed.
pub const GOLD_MODEL: &str = "gold";

/// JSON error body: `{code, message, locus}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    /// What the error is about: a document id, record number or parameter.
    pub locus: Option<String>,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
            locus: None,
        }
    }

    fn at(mut self, locus: impl Into<String>) -> Self {
        self.locus = Some(locus.into());
        self
    }

    fn not_found(what: &'static str, id: &str) -> Self {
        ApiError::new(
            StatusCode::NOT_FOUND,
            what,
            format!("{} {id:?} not found", what.replace('_', " ")),
        )
        .at(id)
    }

    fn bad_param(name: &str, message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "invalid_parameter", message).at(name)
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let message = e.to_string();
        let unprocessable = StatusCode::UNPROCESSABLE_ENTITY;
        match e {
            Error::UnknownDocument(id) => {
                ApiError::new(StatusCode::NOT_FOUND, "unknown_document", message).at(id)
            }
            Error::ScoreAlignment { document, .. } => {
                ApiError::new(unprocessable, "score_alignment", message).at(document)
            }
            Error::GoldAlignment { document, .. } => {
                ApiError::new(unprocessable, "gold_alignment", message).at(document)
            }
            Error::MalformedRecord { record, .. } => {
                ApiError::new(unprocessable, "malformed_record", message)
                    .at(format!("record {record}"))
            }
            Error::DuplicateDocument(id) => {
                ApiError::new(unprocessable, "duplicate_document", message).at(id)
            }
            Error::MissingGold(id) => ApiError::new(unprocessable, "missing_gold", message).at(id),
            Error::EmptyDocument(id) => {
                ApiError::new(unprocessable, "empty_document", message).at(id)
            }
            Error::MissingTransitions => {
                ApiError::new(unprocessable, "missing_transitions", message)
            }
            Error::UndefinedCorrelation(_) => {
                ApiError::new(unprocessable, "undefined_correlation", message)
            }
            Error::InvalidArgument(_) | Error::Config(_) => {
                ApiError::new(StatusCode::BAD_REQUEST, "invalid_argument", message)
            }
            _ => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(&self)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;
type SmoothCache = HashMap<(String, [u64; 6]), Arc<ScoreSet>>;

struct CorpusEntry {
    corpus: Arc<Corpus>,
    gold: Option<Arc<PostProcessed>>,
    transitions: Option<TransitionModel>,
    scoresets: IndexMap<String, Arc<ScoreSet>>,
    /// Smoothed scores per (model id, transition model).
    smoothed: Mutex<SmoothCache>,
}

fn fingerprint(tm: &TransitionModel) -> [u64; 6] {
    let t = tm.transition;
    [
        t[0][0].to_bits(),
        t[0][1].to_bits(),
        t[1][0].to_bits(),
        t[1][1].to_bits(),
        tm.initial[0].to_bits(),
        tm.initial[1].to_bits(),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusSummary {
    pub id: String,
    pub documents: usize,
    pub tokens: usize,
    pub has_gold: bool,
    pub has_transitions: bool,
    pub models: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GoldSummary {
    pub segment_count: usize,
    pub relevant_tokens: usize,
    pub score: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DocumentSummary {
    pub id: String,
    pub token_count: usize,
    pub segment_count: usize,
    pub relevant_tokens: usize,
    pub score: f64,
    pub rank: usize,
    pub gold: Option<GoldSummary>,
    pub evaluation: Option<EvalResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DocumentListing {
    pub corpus: String,
    pub model: String,
    pub method: RankingMethod,
    pub gold_method: RankingMethod,
    pub settings: PostProcessSettings,
    /// In rank order.
    pub documents: Vec<DocumentSummary>,
    /// Model ranking against gold ranking, when gold is present and the
    /// correlation is defined.
    pub spearman_rho: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TokenView {
    pub index: usize,
    pub text: String,
    pub line: usize,
    pub position: usize,
    /// Post-processed (smoothed when requested) score.
    pub score: f64,
    pub raw_score: f64,
    pub relevant: bool,
    pub gold: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DocumentView {
    pub corpus: String,
    pub model: String,
    pub settings: PostProcessSettings,
    pub tokens: Vec<TokenView>,
    pub segments: Vec<Segment>,
    pub gold_segments: Option<Vec<Segment>>,
    pub summary: DocumentSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnalysisPayload {
    Sweep(ThresholdSweep),
    Lexicalization(LexicalizationReport),
    Histogram(ScoreHistogram),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankingMatrix {
    pub corpus: String,
    pub model: String,
    pub settings: PostProcessSettings,
    /// Row labels (gold methods) and column labels (model methods).
    pub methods: Vec<RankingMethod>,
    /// `matrix[gold][model]`.
    pub matrix: [[f64; 3]; 3],
}

/// Parameters of an analysis request.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisRequest {
    pub kind: String,
    pub document: Option<String>,
    pub smoothing: bool,
    pub beta: f64,
    pub grid_size: usize,
    pub min_frequency: usize,
    pub case_fold: bool,
    pub bins: usize,
}

impl Default for AnalysisRequest {
    fn default() -> Self {
        AnalysisRequest {
            kind: "histogram".into(),
            document: None,
            smoothing: false,
            beta: 2.0,
            grid_size: 100,
            min_frequency: 1,
            case_fold: false,
            bins: 20,
        }
    }
}

/// Loaded corpora, their score sets and transition models.
#[derive(Default)]
pub struct Session {
    corpora: IndexMap<String, CorpusEntry>,
}

pub type SharedSession = Arc<RwLock<Session>>;

impl Session {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn into_shared(self) -> SharedSession {
        Arc::new(RwLock::new(self))
    }

    /// Registers a corpus under its name. Transitions are estimated from
    /// its gold labels when present.
    pub fn add_corpus(&mut self, corpus: Corpus) -> ApiResult<String> {
        let id = corpus.name().to_owned();
        if id.is_empty() {
            return Err(ApiError::bad_param("id", "corpus id must not be empty"));
        }
        if self.corpora.contains_key(&id) {
            return Err(ApiError::new(
                StatusCode::CONFLICT,
                "duplicate_corpus",
                format!("corpus {id:?} already loaded"),
            )
            .at(&id));
        }
        let (gold, transitions) = if corpus.has_gold() && !corpus.is_empty() {
            (
                Some(Arc::new(gold_annotations(&corpus)?)),
                Some(estimate_transitions(&corpus)?),
            )
        } else {
            (None, None)
        };
        self.corpora.insert(
            id.clone(),
            CorpusEntry {
                corpus: Arc::new(corpus),
                gold,
                transitions,
                scoresets: IndexMap::new(),
                smoothed: Mutex::new(HashMap::new()),
            },
        );
        Ok(id)
    }

    /// Replaces the transition model used to smooth this corpus's scores.
    pub fn set_transitions(
        &mut self,
        corpus_id: &str,
        transitions: TransitionModel,
    ) -> ApiResult<()> {
        self.entry_mut(corpus_id)?.transitions = Some(transitions);
        Ok(())
    }

    /// Registers a score set aligned to a loaded corpus under its model id.
    pub fn add_scoreset(&mut self, corpus_id: &str, scores: ScoreSet) -> ApiResult<String> {
        let entry = self.entry_mut(corpus_id)?;
        let id = scores.model_id.clone();
        if id.is_empty() {
            return Err(ApiError::bad_param("id", "score set needs a model id"));
        }
        if id == GOLD_MODEL || entry.scoresets.contains_key(&id) {
            return Err(ApiError::new(
                StatusCode::CONFLICT,
                "duplicate_model",
                format!("model {id:?} already exists for corpus {corpus_id:?}"),
            )
            .at(&id));
        }
        scores.check_alignment(&entry.corpus)?;
        entry.scoresets.insert(id.clone(), Arc::new(scores));
        Ok(id)
    }

    pub fn corpus(&self, corpus_id: &str) -> Option<&Corpus> {
        self.corpora.get(corpus_id).map(|e| e.corpus.as_ref())
    }

    pub fn list_corpora(&self) -> Vec<CorpusSummary> {
        self.corpora
            .iter()
            .map(|(id, e)| {
                let mut models: Vec<String> = e.scoresets.keys().cloned().collect();
                if e.gold.is_some() {
                    models.push(GOLD_MODEL.to_owned());
                }
                CorpusSummary {
                    id: id.clone(),
                    documents: e.corpus.len(),
                    tokens: e.corpus.token_count(),
                    has_gold: e.gold.is_some(),
                    has_transitions: e.transitions.is_some(),
                    models,
                }
            })
            .collect()
    }

    fn entry(&self, corpus_id: &str) -> ApiResult<&CorpusEntry> {
        self.corpora
            .get(corpus_id)
            .ok_or_else(|| ApiError::not_found("unknown_corpus", corpus_id))
    }

    fn entry_mut(&mut self, corpus_id: &str) -> ApiResult<&mut CorpusEntry> {
        self.corpora
            .get_mut(corpus_id)
            .ok_or_else(|| ApiError::not_found("unknown_corpus", corpus_id))
    }

    /// Raw scores of `model`, or smoothed ones (cached) when asked.
    fn scores(
        &self,
        entry: &CorpusEntry,
        model: &str,
        smoothing: bool,
    ) -> ApiResult<Arc<ScoreSet>> {
        let raw = if model == GOLD_MODEL {
            match &entry.gold {
                Some(g) => Arc::new(g.scores.clone()),
                None => return Err(ApiError::not_found("unknown_model", model)),
            }
        } else {
            entry
                .scoresets
                .get(model)
                .cloned()
                .ok_or_else(|| ApiError::not_found("unknown_model", model))?
        };
        if !smoothing {
            return Ok(raw);
        }
        let tm = entry
            .transitions
            .as_ref()
            .ok_or(Error::MissingTransitions)?;
        let key = (model.to_owned(), fingerprint(tm));
        if let Some(hit) = entry.smoothed.lock().expect("cache lock").get(&key) {
            return Ok(hit.clone());
        }
        let smoothed = Arc::new(smooth_scores(&raw, &entry.corpus, tm)?);
        entry
            .smoothed
            .lock()
            .expect("cache lock")
            .entry(key)
            .or_insert(smoothed.clone());
        Ok(smoothed)
    }

    fn annotations(
        &self,
        entry: &CorpusEntry,
        model: &str,
        settings: PostProcessSettings,
    ) -> ApiResult<PostProcessed> {
        settings.validate()?;
        let scores = self.scores(entry, model, settings.smoothing)?;
        Ok(segment_scores(scores.as_ref().clone(), settings)?)
    }

    /// Per-document summaries in rank order.
    pub fn list_documents(
        &self,
        corpus_id: &str,
        model: &str,
        settings: PostProcessSettings,
        method: RankingMethod,
        gold_method: RankingMethod,
        beta: f64,
    ) -> ApiResult<DocumentListing> {
        let entry = self.entry(corpus_id)?;
        let ann = self.annotations(entry, model, settings)?;
        let ranking = rank_documents(&entry.corpus, &ann, method)?;
        let gold_ranking = match &entry.gold {
            Some(g) => Some(rank_documents(&entry.corpus, g, gold_method)?),
            None => None,
        };
        let documents = ranking
            .entries
            .iter()
            .map(|r| {
                summarize(
                    entry,
                    &ann,
                    r.score,
                    r.rank,
                    &r.id,
                    gold_ranking.as_ref(),
                    beta,
                )
            })
            .collect();
        let spearman_rho = gold_ranking
            .as_ref()
            .and_then(|g| spearman_rho(g, &ranking).ok());
        Ok(DocumentListing {
            corpus: corpus_id.to_owned(),
            model: model.to_owned(),
            method,
            gold_method,
            settings,
            documents,
            spearman_rho,
        })
    }

    /// One document with per-token scores, segments and summary statistics.
    pub fn document_view(
        &self,
        corpus_id: &str,
        document_id: &str,
        model: &str,
        settings: PostProcessSettings,
        method: RankingMethod,
        beta: f64,
    ) -> ApiResult<DocumentView> {
        let entry = self.entry(corpus_id)?;
        let doc = entry
            .corpus
            .document(document_id)
            .ok_or_else(|| ApiError::not_found("unknown_document", document_id))?;
        let ann = self.annotations(entry, model, settings)?;
        let raw = self.scores(entry, model, false)?;
        let ranking = rank_documents(&entry.corpus, &ann, method)?;
        let ranked = ranking.get(document_id).expect("every document is ranked");
        let scores = ann.scores.get(document_id).expect("aligned");
        let raw_scores = raw.get(document_id).expect("aligned");
        let labels = ann.labels(document_id).expect("aligned");
        let gold = doc.gold();
        let tokens = doc
            .tokens()
            .enumerate()
            .map(|(i, t)| TokenView {
                index: i,
                text: t.text.clone(),
                line: t.line_index,
                position: t.position,
                score: scores[i],
                raw_score: raw_scores[i],
                relevant: labels[i],
                gold: gold.map(|g| g[i]),
            })
            .collect();
        Ok(DocumentView {
            corpus: corpus_id.to_owned(),
            model: model.to_owned(),
            settings,
            tokens,
            segments: ann.segments(document_id).expect("aligned").to_vec(),
            gold_segments: entry
                .gold
                .as_ref()
                .map(|g| g.segments(document_id).expect("aligned").to_vec()),
            summary: summarize(
                entry,
                &ann,
                ranked.score,
                ranked.rank,
                document_id,
                None,
                beta,
            ),
        })
    }

    /// Threshold sweep, lexicalization or score histogram over a score set,
    /// or over one document when `request.document` is set.
    pub fn analysis(
        &self,
        corpus_id: &str,
        model: &str,
        request: &AnalysisRequest,
    ) -> ApiResult<AnalysisPayload> {
        let entry = self.entry(corpus_id)?;
        let all = self.scores(entry, model, request.smoothing)?;
        let (scores, corpus) = match &request.document {
            Some(d) => {
                let doc_scores = all
                    .get(d)
                    .ok_or_else(|| ApiError::not_found("unknown_document", d))?;
                let mut one = ScoreSet::new(all.model_id.clone());
                one.smoothed = all.smoothed;
                one.insert(d.clone(), doc_scores.to_vec())?;
                (
                    Arc::new(one),
                    Arc::new(entry.corpus.subset(entry.corpus.name(), |id| id == d)),
                )
            }
            None => (all, entry.corpus.clone()),
        };
        match request.kind.as_str() {
            "sweep" => {
                if entry.gold.is_none() {
                    return Err(ApiError::new(
                        StatusCode::UNPROCESSABLE_ENTITY,
                        "missing_gold",
                        "threshold sweep needs gold labels",
                    )
                    .at(corpus_id));
                }
                Ok(AnalysisPayload::Sweep(threshold_sweep(
                    &scores,
                    &corpus,
                    request.beta,
                    request.grid_size,
                )?))
            }
            "lexicalization" => Ok(AnalysisPayload::Lexicalization(lexicalization(
                &scores,
                &corpus,
                request.min_frequency,
                request.case_fold,
            )?)),
            "histogram" => Ok(AnalysisPayload::Histogram(score_histogram(
                scores.all_scores(),
                request.bins,
            )?)),
            other => Err(ApiError::not_found("unknown_analysis", other)),
        }
    }

    /// ρ between gold and model rankings for every pair of methods.
    pub fn ranking_matrix(
        &self,
        corpus_id: &str,
        model: &str,
        settings: PostProcessSettings,
    ) -> ApiResult<RankingMatrix> {
        let entry = self.entry(corpus_id)?;
        let gold = entry.gold.as_ref().ok_or_else(|| {
            ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "missing_gold",
                "ranking matrix needs gold labels",
            )
            .at(corpus_id)
        })?;
        let ann = self.annotations(entry, model, settings)?;
        Ok(RankingMatrix {
            corpus: corpus_id.to_owned(),
            model: model.to_owned(),
            settings,
            methods: RankingMethod::ALL.to_vec(),
            matrix: ranking_method_matrix(&entry.corpus, gold, &ann)?,
        })
    }
}

fn summarize(
    entry: &CorpusEntry,
    ann: &PostProcessed,
    score: f64,
    rank: usize,
    id: &str,
    gold_ranking: Option<&RankingResult>,
    beta: f64,
) -> DocumentSummary {
    let doc = entry.corpus.document(id).expect("ranked documents exist");
    let labels = ann.labels(id).expect("aligned");
    let gold_labels = doc.gold();
    let gold = match (&entry.gold, gold_ranking) {
        (Some(g), Some(r)) => {
            let ranked = r.get(id).expect("gold ranks every document");
            Some(GoldSummary {
                segment_count: g.segments(id).expect("aligned").len(),
                relevant_tokens: gold_labels.map_or(0, |l| l.iter().filter(|&&x| x).count()),
                score: ranked.score,
                rank: ranked.rank,
            })
        }
        _ => None,
    };
    DocumentSummary {
        id: id.to_owned(),
        token_count: doc.token_count(),
        segment_count: ann.segments(id).expect("aligned").len(),
        relevant_tokens: labels.iter().filter(|&&l| l).count(),
        score,
        rank,
        gold,
        evaluation: gold_labels.map(|g| evaluate(labels, g, beta)),
    }
}

/// Query-string parameters with typed accessors; errors name the parameter.
struct Params(HashMap<String, String>);

impl Params {
    fn parse<T: std::str::FromStr>(&self, name: &str) -> ApiResult<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.0
            .get(name)
            .filter(|v| !v.is_empty())
            .map(|v| {
                v.parse()
                    .map_err(|e| ApiError::bad_param(name, format!("{name}={v}: {e}")))
            })
            .transpose()
    }

    fn flag(&self, name: &str) -> ApiResult<bool> {
        match self.0.get(name).map(String::as_str) {
            None | Some("0" | "false" | "off" | "no") => Ok(false),
            Some("" | "1" | "true" | "on" | "yes") => Ok(true),
            Some(v) => Err(ApiError::bad_param(
                name,
                format!("{name}={v}: expected a boolean"),
            )),
        }
    }

    fn model(&self) -> ApiResult<String> {
        self.0
            .get("model")
            .filter(|m| !m.is_empty())
            .cloned()
            .ok_or_else(|| ApiError::bad_param("model", "missing model parameter"))
    }

    fn settings(&self) -> ApiResult<PostProcessSettings> {
        let d = PostProcessSettings::default();
        let s = PostProcessSettings {
            threshold: self.parse("threshold")?.unwrap_or(d.threshold),
            collapse_gap: self.parse("collapse")?.unwrap_or(d.collapse_gap),
            smoothing: self.flag("smooth")?,
        };
        s.validate()
            .map_err(|e| ApiError::bad_param("threshold", e.to_string()))?;
        Ok(s)
    }

    fn method(&self, name: &str) -> ApiResult<RankingMethod> {
        Ok(self.parse(name)?.unwrap_or_default())
    }

    fn beta(&self) -> ApiResult<f64> {
        let beta = self.parse("beta")?.unwrap_or(2.0);
        if beta > 0.0 {
            Ok(beta)
        } else {
            Err(ApiError::bad_param("beta", "beta must be > 0"))
        }
    }
}

fn read_session(state: &SharedSession) -> std::sync::RwLockReadGuard<'_, Session> {
    // a panicking handler cannot leave the session half-updated: uploads
    // validate before inserting
    state.read().unwrap_or_else(|p| p.into_inner())
}

async fn get_corpora(State(state): State<SharedSession>) -> Json<Vec<CorpusSummary>> {
    Json(read_session(&state).list_corpora())
}

async fn post_corpus(
    State(state): State<SharedSession>,
    Query(q): Query<HashMap<String, String>>,
    body: String,
) -> ApiResult<(StatusCode, Json<serde_json::Value>)> {
    let id = q
        .get("id")
        .filter(|s| !s.is_empty())
        .ok_or_else(|| ApiError::bad_param("id", "missing corpus id"))?;
    let corpus = Corpus::read_jsonl(Cursor::new(body), id.clone())?;
    let id = state
        .write()
        .unwrap_or_else(|p| p.into_inner())
        .add_corpus(corpus)?;
    Ok((StatusCode::CREATED, Json(serde_json::json!({ "id": id }))))
}

async fn post_scoreset(
    State(state): State<SharedSession>,
    Path(corpus): Path<String>,
    Query(q): Query<HashMap<String, String>>,
    body: String,
) -> ApiResult<(StatusCode, Json<serde_json::Value>)> {
    let mut scores = ScoreSet::read_jsonl(Cursor::new(body), "")?;
    if let Some(id) = q.get("id").filter(|s| !s.is_empty()) {
        scores.model_id = id.clone();
    }
    let id = state
        .write()
        .unwrap_or_else(|p| p.into_inner())
        .add_scoreset(&corpus, scores)?;
    Ok((StatusCode::CREATED, Json(serde_json::json!({ "id": id }))))
}

async fn get_documents(
    State(state): State<SharedSession>,
    Path(corpus): Path<String>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<Json<DocumentListing>> {
    let p = Params(q);
    let listing = read_session(&state).list_documents(
        &corpus,
        &p.model()?,
        p.settings()?,
        p.method("method")?,
        p.method("gold_method")?,
        p.beta()?,
    )?;
    Ok(Json(listing))
}

async fn get_document(
    State(state): State<SharedSession>,
    Path((corpus, document)): Path<(String, String)>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<Json<DocumentView>> {
    let p = Params(q);
    let view = read_session(&state).document_view(
        &corpus,
        &document,
        &p.model()?,
        p.settings()?,
        p.method("method")?,
        p.beta()?,
    )?;
    Ok(Json(view))
}

async fn get_analysis(
    State(state): State<SharedSession>,
    Path((corpus, kind)): Path<(String, String)>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<Json<AnalysisPayload>> {
    let p = Params(q);
    let d = AnalysisRequest::default();
    let request = AnalysisRequest {
        kind,
        document: p.0.get("document").filter(|s| !s.is_empty()).cloned(),
        smoothing: p.flag("smooth")?,
        beta: p.beta()?,
        grid_size: p.parse("grid")?.unwrap_or(d.grid_size),
        min_frequency: p.parse("min_frequency")?.unwrap_or(d.min_frequency),
        case_fold: p.flag("case_fold")?,
        bins: p.parse("bins")?.unwrap_or(d.bins),
    };
    Ok(Json(read_session(&state).analysis(
        &corpus,
        &p.model()?,
        &request,
    )?))
}

async fn get_ranking_matrix(
    State(state): State<SharedSession>,
    Path(corpus): Path<String>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<Json<RankingMatrix>> {
    let p = Params(q);
    Ok(Json(read_session(&state).ranking_matrix(
        &corpus,
        &p.model()?,
        p.settings()?,
    )?))
}

async fn fallback() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint")
}

pub fn router(state: SharedSession) -> Router {
    Router::new()
        .route("/corpora", get(get_corpora).post(post_corpus))
        .route("/corpora/{corpus}/documents", get(get_documents))
        .route("/corpora/{corpus}/documents/{document}", get(get_document))
        .route("/corpora/{corpus}/analysis/{kind}", get(get_analysis))
        .route(
            "/corpora/{corpus}/scoresets",
            axum::routing::post(post_scoreset),
        )
        .route("/corpora/{corpus}/ranking-matrix", get(get_ranking_matrix))
        .fallback(fallback)
        .with_state(state)
}

/// Serves the session until the process is stopped.
pub async fn serve(addr: SocketAddr, session: SharedSession) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(session)).await
}
