//! Versioned HTTP API over one corpus.
//!
//! Reads share a lock; revisions take it exclusively, so writes are
//! serialized. Every mutation names the corpus version it was drafted
//! against and is refused with 409 when that version is stale.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use ncb_core::corpus::{CorpusError, InferenceConfig, RetrievalCorpus, Selector, OTHER_CONCEPT};
use ncb_core::encoding::{LabeledScene, SlotSelection, SyntheticEncoder};
use ncb_core::inspection::{
    comparative_inspect, implicit_inspect, interventional_inspect, similarity_inspect, InspectionError, Intervention,
    DEFAULT_MATCHES,
};
use ncb_core::revision::{apply_feedback, FeedbackDocument, LogEntry, RevisionAction, RevisionError, RevisionLog};
use ncb_core::sudoku::io::SudokuDataset;
use ncb_core::sudoku::{
    evaluate_features, solve_sample, ConceptSource, PuzzleFeatures, PuzzleOutcome, SudokuError, SudokuSample,
    SuiteReport,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::args::ServeArgs;
use crate::error::{CliError, CliResult, ErrorClass};
use crate::files::{load_corpus, load_encoder, load_log, load_scenes, now_stamp, save_corpus, write_atomic};
use crate::workspace::Workspace;

pub const API_VERSION: &str = "v1";

/// Where revisions are written back, when persistence is on.
#[derive(Clone, Debug)]
pub struct Persist {
    pub corpus: PathBuf,
    pub log: Option<PathBuf>,
}

/// Everything the API serves.
pub struct ServiceState {
    pub corpus: RetrievalCorpus,
    pub log: RevisionLog,
    /// Encoder of `scenes`; needed for interventions.
    pub encoder: Option<SyntheticEncoder>,
    pub scenes: Vec<LabeledScene>,
    pub dataset: Option<SudokuDataset>,
    /// Encoder of the dataset's puzzle objects.
    pub dataset_encoder: Option<SyntheticEncoder>,
    pub slot_mode: SlotSelection,
    pub persist: Option<Persist>,
}

impl ServiceState {
    pub fn new(corpus: RetrievalCorpus) -> Self {
        ServiceState {
            corpus,
            log: RevisionLog::new(),
            encoder: None,
            scenes: Vec::new(),
            dataset: None,
            dataset_encoder: None,
            slot_mode: SlotSelection::MaxOne,
            persist: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Running,
    Done,
    Failed,
}

struct Job {
    status: JobStatus,
    total: usize,
    done: Arc<AtomicUsize>,
    corpus_version: u64,
    report: Option<SuiteReport>,
    error: Option<String>,
}

#[derive(Clone)]
pub struct AppState {
    inner: Arc<RwLock<ServiceState>>,
    jobs: Arc<Mutex<BTreeMap<u64, Job>>>,
}

impl AppState {
    pub fn new(state: ServiceState) -> Self {
        AppState {
            inner: Arc::new(RwLock::new(state)),
            jobs: Arc::new(Mutex::new(BTreeMap::new())),
        }
    }

    fn read(&self) -> std::sync::RwLockReadGuard<'_, ServiceState> {
        self.inner.read().unwrap_or_else(|e| e.into_inner())
    }

    fn write(&self) -> std::sync::RwLockWriteGuard<'_, ServiceState> {
        self.inner.write().unwrap_or_else(|e| e.into_inner())
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/v1/version", get(version))
        .route("/v1/blocks", get(blocks))
        .route("/v1/blocks/{block}/concepts", get(concepts))
        .route("/v1/blocks/{block}/concepts/{concept}", get(card))
        .route("/v1/blocks/{block}/concepts/{concept}/similar", get(similar))
        .route("/v1/blocks/{block}/compare", get(compare))
        .route("/v1/interventions", post(intervene))
        .route("/v1/revisions", get(revisions).post(revise))
        .route("/v1/scenes/{scene}/concepts", get(scene_concepts))
        .route("/v1/sudoku/samples", post(sudoku_sample))
        .route("/v1/sudoku/jobs", post(start_job))
        .route("/v1/sudoku/jobs/{id}", get(job))
        .fallback(not_found)
        .with_state(state)
}

// ---- errors

#[derive(Debug, Serialize)]
struct ErrorBody {
    code: &'static str,
    message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    current_version: Option<u64>,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl ToString) -> Self {
        ApiError {
            status,
            body: ErrorBody {
                code,
                message: message.to_string(),
                current_version: None,
            },
        }
    }

    fn not_found(message: impl ToString) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", message)
    }

    fn invalid(message: impl ToString) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "invalid", message)
    }

    fn rejected(message: impl ToString) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "rejected", message)
    }

    fn unavailable(what: &str) -> Self {
        Self::new(StatusCode::CONFLICT, "not_loaded", format!("the server was started without {what}"))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(serde_json::json!({ "error": self.body }))).into_response()
    }
}

fn is_lookup(e: &CorpusError) -> bool {
    matches!(
        e,
        CorpusError::UnknownBlock { .. } | CorpusError::UnknownConcept { .. } | CorpusError::UnknownEntry { .. }
    )
}

impl From<CorpusError> for ApiError {
    fn from(e: CorpusError) -> Self {
        if is_lookup(&e) {
            ApiError::not_found(e)
        } else {
            ApiError::rejected(e)
        }
    }
}

impl From<InspectionError> for ApiError {
    fn from(e: InspectionError) -> Self {
        match e {
            InspectionError::Corpus(c) => c.into(),
            InspectionError::UnknownSample { .. } => ApiError::not_found(e),
            other => ApiError::rejected(other),
        }
    }
}

impl From<RevisionError> for ApiError {
    fn from(e: RevisionError) -> Self {
        let message = e.to_string();
        let mut inner = &e;
        while let RevisionError::Action { source, .. } = inner {
            inner = source;
        }
        match inner {
            RevisionError::Corpus(c) if is_lookup(c) => ApiError::not_found(message),
            RevisionError::Schema(_) => ApiError::invalid(message),
            _ => ApiError::rejected(message),
        }
    }
}

impl From<SudokuError> for ApiError {
    fn from(e: SudokuError) -> Self {
        CliError::from(e).into()
    }
}

impl From<CliError> for ApiError {
    fn from(e: CliError) -> Self {
        match e.class {
            ErrorClass::Io => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.message),
            ErrorClass::Validation => ApiError::invalid(e.message),
            ErrorClass::Domain => ApiError::rejected(e.message),
        }
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

async fn not_found() -> ApiError {
    ApiError::not_found("no such endpoint")
}

// ---- corpus queries

#[derive(Debug, Serialize, Deserialize)]
pub struct VersionInfo {
    pub api_version: String,
    pub corpus_version: u64,
    pub corpus_fingerprint: String,
    pub revisions: usize,
    pub n_blocks: usize,
    pub scenes: usize,
    pub sudoku_puzzles: usize,
}

async fn version(State(s): State<AppState>) -> Json<VersionInfo> {
    let st = s.read();
    Json(VersionInfo {
        api_version: API_VERSION.to_owned(),
        corpus_version: st.corpus.version(),
        corpus_fingerprint: st.corpus.fingerprint(),
        revisions: st.log.len(),
        n_blocks: st.corpus.n_blocks(),
        scenes: st.scenes.len(),
        sudoku_puzzles: st.dataset.as_ref().map_or(0, |d| d.bases.len()),
    })
}

#[derive(Debug, Serialize, Deserialize)]
pub struct BlockSummary {
    pub block: usize,
    /// Factor the encoder wrote into this block, if any.
    pub factor: Option<String>,
    /// Informative concepts, i.e. live ids other than the reserved one.
    pub n_concepts: usize,
    pub n_entries: usize,
    pub deleted_to_single: bool,
    pub zeroed: Vec<u32>,
}

pub fn block_summaries(corpus: &RetrievalCorpus, encoder: Option<&SyntheticEncoder>) -> Vec<BlockSummary> {
    corpus
        .blocks()
        .iter()
        .enumerate()
        .map(|(j, b)| BlockSummary {
            block: j,
            factor: encoder.and_then(|e| e.config().category_of_block(j)).map(str::to_owned),
            n_concepts: b.informative_concepts().len(),
            n_entries: b.n_entries(),
            deleted_to_single: b.deleted_to_single(),
            zeroed: b.zeroed().iter().copied().collect(),
        })
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
pub struct BlocksResponse {
    pub corpus_version: u64,
    pub blocks: Vec<BlockSummary>,
}

async fn blocks(State(s): State<AppState>) -> Json<BlocksResponse> {
    let st = s.read();
    Json(BlocksResponse {
        corpus_version: st.corpus.version(),
        blocks: block_summaries(&st.corpus, st.encoder.as_ref()),
    })
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ConceptSummary {
    pub concept: u32,
    pub entries: usize,
    pub prototype: Option<usize>,
    pub zeroed: bool,
    /// The reserved "other" id.
    pub other: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ConceptsResponse {
    pub corpus_version: u64,
    pub block: usize,
    pub concepts: Vec<ConceptSummary>,
}

async fn concepts(State(s): State<AppState>, Path(block): Path<usize>) -> ApiResult<ConceptsResponse> {
    let st = s.read();
    let b = st.corpus.block(block)?;
    let concepts = b
        .live_concepts()
        .into_iter()
        .map(|c| ConceptSummary {
            concept: c,
            entries: b.entries_of(c).count(),
            prototype: b.prototype(c).map(|(l, _)| l),
            zeroed: b.zeroed().contains(&c),
            other: c == OTHER_CONCEPT,
        })
        .collect();
    Ok(Json(ConceptsResponse {
        corpus_version: st.corpus.version(),
        block,
        concepts,
    }))
}

#[derive(Debug, Deserialize)]
struct MatchesQuery {
    matches: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Versioned<T> {
    pub corpus_version: u64,
    #[serde(flatten)]
    pub body: T,
}

async fn card(
    State(s): State<AppState>,
    Path((block, concept)): Path<(usize, u32)>,
    Query(q): Query<MatchesQuery>,
) -> ApiResult<Versioned<ncb_core::inspection::ConceptCard>> {
    let st = s.read();
    let body = implicit_inspect(&st.corpus, block, concept, &st.scenes, q.matches.unwrap_or(DEFAULT_MATCHES))?;
    Ok(Json(Versioned {
        corpus_version: st.corpus.version(),
        body,
    }))
}

#[derive(Debug, Deserialize)]
struct CompareQuery {
    a: u32,
    b: u32,
    matches: Option<usize>,
}

async fn compare(
    State(s): State<AppState>,
    Path(block): Path<usize>,
    Query(q): Query<CompareQuery>,
) -> ApiResult<Versioned<ncb_core::inspection::Comparison>> {
    let st = s.read();
    let body = comparative_inspect(&st.corpus, block, q.a, q.b, &st.scenes, q.matches.unwrap_or(DEFAULT_MATCHES))?;
    Ok(Json(Versioned {
        corpus_version: st.corpus.version(),
        body,
    }))
}

async fn similar(
    State(s): State<AppState>,
    Path((block, concept)): Path<(usize, u32)>,
) -> ApiResult<Versioned<ncb_core::inspection::SimilarityReport>> {
    let st = s.read();
    let body = similarity_inspect(&st.corpus, block, concept)?;
    Ok(Json(Versioned {
        corpus_version: st.corpus.version(),
        body,
    }))
}

async fn intervene(
    State(s): State<AppState>,
    Json(q): Json<Intervention>,
) -> ApiResult<Versioned<ncb_core::inspection::InterventionReport>> {
    let st = s.read();
    let encoder = st.encoder.as_ref().ok_or_else(|| ApiError::unavailable("an encoder"))?;
    let body = interventional_inspect(&st.corpus, encoder, &st.scenes, q)?;
    Ok(Json(Versioned {
        corpus_version: st.corpus.version(),
        body,
    }))
}

#[derive(Debug, Deserialize)]
struct InferQuery {
    top_k: Option<usize>,
    threshold: Option<f32>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SceneConcepts {
    pub scene: usize,
    pub corpus_version: u64,
    pub slots: Vec<ncb_core::corpus::ConceptSlotEncoding>,
}

async fn scene_concepts(
    State(s): State<AppState>,
    Path(scene): Path<usize>,
    Query(q): Query<InferQuery>,
) -> ApiResult<SceneConcepts> {
    let st = s.read();
    let encoding = &st
        .scenes
        .get(scene)
        .ok_or_else(|| ApiError::not_found(format!("scene {scene} does not exist")))?
        .encoding;
    let slot_mode = match q.threshold {
        Some(t) => SlotSelection::threshold(t).map_err(ApiError::invalid)?,
        None => st.slot_mode,
    };
    let selector = q.top_k.map_or(Selector::Nearest, |k| Selector::TopK { k });
    let slots = st.corpus.infer(encoding, &InferenceConfig { slot_mode, selector })?;
    Ok(Json(SceneConcepts {
        scene,
        corpus_version: st.corpus.version(),
        slots,
    }))
}

// ---- revisions

#[derive(Debug, Serialize, Deserialize)]
pub struct RevisionRequest {
    pub expected_version: u64,
    #[serde(default)]
    pub actor: Option<String>,
    pub action: RevisionAction,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RevisionResponse {
    pub corpus_version: u64,
    pub entry: LogEntry,
}

async fn revise(State(s): State<AppState>, Json(req): Json<RevisionRequest>) -> ApiResult<RevisionResponse> {
    let mut st = s.write();
    let current = st.corpus.version();
    if req.expected_version != current {
        let mut e = ApiError::new(
            StatusCode::CONFLICT,
            "conflict",
            format!("corpus is at version {current}, request expected {}", req.expected_version),
        );
        e.body.current_version = Some(current);
        return Err(e);
    }
    let actor = req.actor.unwrap_or_else(|| "api".to_owned());
    let doc = FeedbackDocument::new(actor, vec![req.action]);
    let (next, mut entries) = apply_feedback(&st.corpus, &doc, &now_stamp())?;
    let mut log = st.log.clone();
    log.extend(entries.iter().cloned())?;
    if let Some(p) = &st.persist {
        save_corpus(&p.corpus, &next)?;
        if let Some(path) = &p.log {
            write_atomic(path, log.to_jsonl())?;
        }
    }
    st.corpus = next;
    st.log = log;
    let entry = entries.pop().expect("one action yields one entry");
    Ok(Json(RevisionResponse {
        corpus_version: st.corpus.version(),
        entry,
    }))
}

#[derive(Debug, Deserialize)]
struct SinceQuery {
    since: Option<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RevisionsResponse {
    pub corpus_version: u64,
    pub entries: Vec<LogEntry>,
}

async fn revisions(State(s): State<AppState>, Query(q): Query<SinceQuery>) -> Json<RevisionsResponse> {
    let st = s.read();
    let entries = match q.since {
        Some(v) => st.log.since(v).to_vec(),
        None => st.log.entries().to_vec(),
    };
    Json(RevisionsResponse {
        corpus_version: st.corpus.version(),
        entries,
    })
}

// ---- sudoku

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Concepts {
    Gt,
    #[default]
    Corpus,
}

fn source<'a>(st: &'a ServiceState, concepts: Concepts) -> Result<ConceptSource<'a>, ApiError> {
    Ok(match concepts {
        Concepts::Gt => ConceptSource::GroundTruth,
        Concepts::Corpus => ConceptSource::Corpus {
            corpus: &st.corpus,
            encoder: st
                .dataset_encoder
                .as_ref()
                .ok_or_else(|| ApiError::unavailable("an encoder for the puzzle objects"))?,
            slot_mode: st.slot_mode,
        },
    })
}

fn dataset(st: &ServiceState) -> Result<&SudokuDataset, ApiError> {
    st.dataset.as_ref().ok_or_else(|| ApiError::unavailable("a Sudoku dataset"))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SampleRequest {
    pub index: usize,
    pub k: usize,
    pub n_examples: usize,
    #[serde(default = "one")]
    pub seeds: usize,
    #[serde(default)]
    pub concepts: Concepts,
}

fn one() -> usize {
    1
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SampleResponse {
    pub corpus_version: u64,
    pub index: usize,
    pub k: usize,
    pub n_examples: usize,
    pub concepts: Concepts,
    pub outcomes: Vec<PuzzleOutcome>,
    /// Percent of seeds solved.
    pub solved_percent: f64,
}

async fn sudoku_sample(State(s): State<AppState>, Json(req): Json<SampleRequest>) -> ApiResult<SampleResponse> {
    let state = s.clone();
    tokio::task::spawn_blocking(move || {
        let st = state.read();
        let ds = dataset(&st)?;
        let base = ds
            .bases
            .get(req.index)
            .ok_or_else(|| ApiError::not_found(format!("puzzle {} does not exist", req.index)))?;
        let features = source(&st, req.concepts)?.features(base)?;
        let sample = SudokuSample::new(base.clone(), req.k, req.n_examples)?;
        let outcomes = solve_sample(&sample, &features, req.seeds)?;
        let solved = outcomes.iter().filter(|o| o.solved).count();
        Ok(Json(SampleResponse {
            corpus_version: st.corpus.version(),
            index: req.index,
            k: req.k,
            n_examples: req.n_examples,
            concepts: req.concepts,
            solved_percent: 100.0 * solved as f64 / outcomes.len().max(1) as f64,
            outcomes,
        }))
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e))?
}

#[derive(Debug, Serialize, Deserialize)]
pub struct JobRequest {
    #[serde(default)]
    pub concepts: Concepts,
    pub k: Vec<usize>,
    pub n: Vec<usize>,
    #[serde(default = "one")]
    pub seeds: usize,
    /// Only the first this many puzzles.
    #[serde(default)]
    pub limit: Option<usize>,
    #[serde(default)]
    pub pipeline: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Progress {
    pub done: usize,
    pub total: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct JobResponse {
    pub id: u64,
    pub status: JobStatus,
    pub progress: Progress,
    pub corpus_version: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<SuiteReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

fn job_response(id: u64, job: &Job) -> JobResponse {
    JobResponse {
        id,
        status: job.status,
        progress: Progress {
            done: job.done.load(Ordering::Relaxed),
            total: job.total,
        },
        corpus_version: job.corpus_version,
        report: job.report.clone(),
        error: job.error.clone(),
    }
}

/// Starts a suite evaluation on a snapshot of the current corpus. Progress
/// counts one step per puzzle featurized plus one per `(K, N)` cell.
async fn start_job(State(s): State<AppState>, Json(req): Json<JobRequest>) -> Result<Response, ApiError> {
    if req.k.is_empty() || req.n.is_empty() || req.seeds == 0 {
        return Err(ApiError::invalid("k, n and seeds must be nonempty"));
    }
    let (bases, corpus_version, total, snapshot) = {
        let st = s.read();
        let ds = dataset(&st)?;
        source(&st, req.concepts)?;
        let mut bases = ds.bases.clone();
        if let Some(n) = req.limit {
            bases.truncate(n);
        }
        if bases.is_empty() {
            return Err(ApiError::invalid("no puzzles selected"));
        }
        let total = bases.len() + req.k.len() * req.n.len();
        let snapshot = (st.corpus.clone(), st.dataset_encoder.clone(), st.slot_mode);
        (bases, st.corpus.version(), total, snapshot)
    };
    let done = Arc::new(AtomicUsize::new(0));
    let id = {
        let mut jobs = s.jobs.lock().unwrap_or_else(|e| e.into_inner());
        let id = jobs.keys().next_back().map_or(1, |k| k + 1);
        jobs.insert(
            id,
            Job {
                status: JobStatus::Running,
                total,
                done: done.clone(),
                corpus_version,
                report: None,
                error: None,
            },
        );
        id
    };
    let state = s.clone();
    tokio::task::spawn_blocking(move || {
        let (corpus, encoder, slot_mode) = snapshot;
        let result = run_job(&bases, &corpus, encoder.as_ref(), slot_mode, &req, &done);
        let mut jobs = state.jobs.lock().unwrap_or_else(|e| e.into_inner());
        let job = jobs.get_mut(&id).expect("job registered");
        match result {
            Ok(report) => {
                job.status = JobStatus::Done;
                job.report = Some(report);
            }
            Err(e) => {
                job.status = JobStatus::Failed;
                job.error = Some(e.to_string());
            }
        }
    });
    let jobs = s.jobs.lock().unwrap_or_else(|e| e.into_inner());
    let body = job_response(id, &jobs[&id]);
    Ok((
        StatusCode::ACCEPTED,
        [(header::LOCATION, format!("/v1/sudoku/jobs/{id}"))],
        Json(body),
    )
        .into_response())
}

fn run_job(
    bases: &[Arc<ncb_core::sudoku::PuzzleBase>],
    corpus: &RetrievalCorpus,
    encoder: Option<&SyntheticEncoder>,
    slot_mode: SlotSelection,
    req: &JobRequest,
    done: &AtomicUsize,
) -> Result<SuiteReport, SudokuError> {
    let source = match (req.concepts, encoder) {
        (Concepts::Gt, _) => ConceptSource::GroundTruth,
        (Concepts::Corpus, Some(encoder)) => ConceptSource::Corpus {
            corpus,
            encoder,
            slot_mode,
        },
        (Concepts::Corpus, None) => return Err(SudokuError::InvalidConfig("no puzzle encoder".into())),
    };
    let features: Vec<PuzzleFeatures> = bases
        .par_iter()
        .map(|b| {
            let f = source.features(b);
            done.fetch_add(1, Ordering::Relaxed);
            f
        })
        .collect::<Result<_, _>>()?;
    let pipeline = req.pipeline.clone().unwrap_or_else(|| match req.concepts {
        Concepts::Gt => "gt".to_owned(),
        Concepts::Corpus => "ncb".to_owned(),
    });
    let variant = bases[0].variant;
    let mut report: Option<SuiteReport> = None;
    for &k in &req.k {
        for &n in &req.n {
            let cell = evaluate_features(bases, &features, variant, &pipeline, &[k], &[n], req.seeds)?;
            match &mut report {
                Some(r) => r.rows.extend(cell.rows),
                None => report = Some(cell),
            }
            done.fetch_add(1, Ordering::Relaxed);
        }
    }
    Ok(report.expect("at least one cell"))
}

async fn job(State(s): State<AppState>, Path(id): Path<u64>) -> ApiResult<JobResponse> {
    let jobs = s.jobs.lock().unwrap_or_else(|e| e.into_inner());
    let job = jobs
        .get(&id)
        .ok_or_else(|| ApiError::not_found(format!("job {id} does not exist")))?;
    Ok(Json(job_response(id, job)))
}

// ---- startup

/// Loads the artifacts named on the command line or in a workspace.
pub fn load_state(a: &ServeArgs) -> CliResult<ServiceState> {
    if let Some(path) = &a.workspace {
        let ws = Workspace::open(path)?;
        let corpus = ws
            .corpus
            .ok_or_else(|| CliError::validation(format!("{}: no corpus listed", path.display())))?;
        let dataset = ws.datasets.into_iter().next();
        let dataset_encoder = dataset_encoder(dataset.as_ref(), ws.encoder.as_ref())?;
        let persist = a.persist.then(|| Persist {
            corpus: ws.manifest.current_corpus(&ws.root).expect("corpus listed"),
            log: ws.manifest.revision_log.as_ref().map(|p| ws.root.join(p)),
        });
        return Ok(ServiceState {
            log: ws.log,
            encoder: ws.encoder,
            scenes: ws.scenes,
            dataset,
            dataset_encoder,
            persist,
            ..ServiceState::new(corpus)
        });
    }
    let corpus_path = a.corpus.as_ref().ok_or_else(|| CliError::validation("--corpus is required"))?;
    let corpus = load_corpus(corpus_path)?;
    let encoder = a.encoder.as_deref().map(load_encoder).transpose()?;
    let scenes = match &a.encodings {
        Some(p) => load_scenes(p)?.1,
        None => Vec::new(),
    };
    let log = match &a.log {
        Some(p) => load_log(p)?,
        None => RevisionLog::new(),
    };
    let dataset = a.dataset.as_deref().map(crate::commands::open_dataset).transpose()?;
    let dataset_encoder = dataset_encoder(dataset.as_ref(), encoder.as_ref())?;
    Ok(ServiceState {
        log,
        encoder,
        scenes,
        dataset,
        dataset_encoder,
        persist: a.persist.then(|| Persist {
            corpus: corpus_path.clone(),
            log: a.log.clone(),
        }),
        ..ServiceState::new(corpus)
    })
}

fn dataset_encoder(
    dataset: Option<&SudokuDataset>,
    fallback: Option<&SyntheticEncoder>,
) -> CliResult<Option<SyntheticEncoder>> {
    match dataset {
        Some(d) => Ok(crate::commands::dataset_encoder(d)?.or_else(|| fallback.cloned())),
        None => Ok(None),
    }
}

pub fn serve(a: ServeArgs, out: &mut dyn Write) -> CliResult<()> {
    let state = AppState::new(load_state(&a)?);
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(CliError::io)?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind((a.host, a.port))
            .await
            .map_err(|e| CliError::io(e).context(format!("{}:{}", a.host, a.port)))?;
        let addr = listener.local_addr().map_err(CliError::io)?;
        writeln!(out, "listening on http://{addr}/{API_VERSION}").map_err(CliError::io)?;
        out.flush().map_err(CliError::io)?;
        axum::serve(listener, router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(CliError::io)
    })
}
