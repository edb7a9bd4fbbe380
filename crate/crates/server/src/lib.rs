//! HTTP/JSON front end for training, scoring and evaluation.
//!
//! Training and experiments are CPU bound and run on the blocking pool.
//! Trained or uploaded model triples are kept in an in-memory registry keyed
//! by a content hash, so the same models always get the same bundle id.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use axum::extract::rejection::JsonRejection;
use axum::extract::{DefaultBodyLimit, FromRequest, Path, Query, Request, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Deserialize;

use gaitae_core::api::*;
use gaitae_core::autoencoder::{export_second_layer_filters, AxisModel, ModelFile};
use gaitae_core::evalmetrics::{evaluate, format_table};
use gaitae_core::harness::experiment::{normal_samples, score_sequence, train_axes, SequenceRecord};
use gaitae_core::harness::io::{sha256_hex, IndexSummary};
use gaitae_core::harness::run_experiment;
use gaitae_core::index::{aggregate, ScorerBundle};

/// Request bodies carry whole sequences and model files.
pub const BODY_LIMIT: usize = 512 * 1024 * 1024;

#[derive(Default)]
pub struct AppState {
    bundles: RwLock<HashMap<String, Arc<ScorerBundle>>>,
}

impl AppState {
    pub fn new() -> Arc<Self> {
        Arc::new(AppState::default())
    }

    fn register(&self, bundle: ScorerBundle) -> (String, Arc<ScorerBundle>) {
        let id = bundle_id(bundle.models());
        let bundle = Arc::new(bundle);
        self.bundles
            .write()
            .expect("bundle registry poisoned")
            .insert(id.clone(), bundle.clone());
        (id, bundle)
    }

    fn get(&self, id: &str) -> Result<Arc<ScorerBundle>, ApiError> {
        self.bundles
            .read()
            .expect("bundle registry poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "not_found", format!("no bundle {id}")))
    }
}

fn bundle_id(models: &[AxisModel; 3]) -> String {
    let text: Vec<String> = models.iter().map(AxisModel::to_json).collect();
    sha256_hex(text.join("\n").as_bytes())[..16].to_string()
}

pub fn app(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/v1/synth", post(synth))
        .route("/v1/train", post(train))
        .route("/v1/bundles", post(create_bundle))
        .route("/v1/bundles/{id}", get(get_bundle))
        .route("/v1/bundles/{id}/score", post(score_with_bundle))
        .route("/v1/score", post(score))
        .route("/v1/eval", post(eval))
        .route("/v1/filters", post(filters))
        .route("/v1/experiments", post(experiment))
        .layer(DefaultBodyLimit::max(BODY_LIMIT))
        .with_state(state)
}

/// Serves the API on an already bound listener until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: Arc<AppState>,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, app(state)).with_graceful_shutdown(shutdown).await
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, kind: &str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            body: ErrorBody::new(kind, message),
        }
    }
}

impl From<gaitae_core::Error> for ApiError {
    fn from(e: gaitae_core::Error) -> Self {
        let status = match e.kind() {
            "io" => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        ApiError {
            status,
            body: ErrorBody::from(&e),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

/// JSON body extractor whose rejections use the service's error shape.
pub struct Body<T>(pub T);

impl<S, T> FromRequest<S> for Body<T>
where
    T: DeserializeOwned,
    S: Send + Sync,
{
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        match Json::<T>::from_request(req, state).await {
            Ok(Json(v)) => Ok(Body(v)),
            Err(rej) => Err(rejection(rej)),
        }
    }
}

fn rejection(rej: JsonRejection) -> ApiError {
    ApiError::new(rej.status(), "request", rej.body_text())
}

async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    F: FnOnce() -> Result<T, ApiError> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
}

fn models_from_files(files: Vec<ModelFile>) -> Result<ScorerBundle, ApiError> {
    let models = files
        .into_iter()
        .map(|f| f.into_model().map_err(gaitae_core::Error::from))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ScorerBundle::from_models(models).map_err(gaitae_core::Error::from)?)
}

fn bundle_info(id: String, bundle: &ScorerBundle) -> BundleInfo {
    BundleInfo {
        bundle_id: id,
        weights: bundle.weights(),
        train_mse: bundle.train_errors(),
    }
}

async fn health() -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        version: env!("CARGO_PKG_VERSION").into(),
    })
}

async fn synth(Body(req): Body<SynthRequest>) -> Result<Json<SynthResponse>, ApiError> {
    blocking(move || {
        let split = req.plan.split();
        let sequences = req.plan.generate().iter().map(SequenceRecord::from_sequence).collect();
        Ok(Json(SynthResponse {
            train_subjects: split.train_subjects,
            test_subjects: split.test_subjects,
            sequences,
        }))
    })
    .await
}

#[derive(Debug, Default, Deserialize)]
struct TrainQuery {
    #[serde(default)]
    logs: bool,
}

async fn train(
    State(state): State<Arc<AppState>>,
    Query(q): Query<TrainQuery>,
    Body(req): Body<TrainRequest>,
) -> Result<Json<TrainResponse>, ApiError> {
    blocking(move || {
        let sequences = req
            .sequences
            .iter()
            .map(|r| r.parse().map_err(gaitae_core::Error::from))
            .collect::<Result<Vec<_>, _>>()?;
        let samples = normal_samples(&sequences)?;
        let frames = samples[0].len();
        tracing::info!(frames, epochs = req.config.epochs, "training");
        let [(mx, lx), (my, ly), (mz, lz)] = train_axes(&samples, &req.config)?;
        let bundle = ScorerBundle::new(mx, my, mz).map_err(gaitae_core::Error::from)?;
        let logs = [lx, ly, lz];
        let models = bundle.models().iter().map(ModelFile::from_model).collect();
        let weights = bundle.weights();
        let train_mse = bundle.train_errors();
        let (bundle_id, _) = state.register(bundle);
        Ok(Json(TrainResponse {
            bundle_id,
            frames,
            models,
            weights,
            train_mse,
            epoch_loss: logs.each_ref().map(|l| gaitae_core::autoencoder::epoch_means(l)),
            logs: q.logs.then_some(logs),
        }))
    })
    .await
}

async fn create_bundle(
    State(state): State<Arc<AppState>>,
    Body(req): Body<BundleRequest>,
) -> Result<(StatusCode, Json<BundleInfo>), ApiError> {
    let bundle = models_from_files(req.models)?;
    let (id, bundle) = state.register(bundle);
    Ok((StatusCode::CREATED, Json(bundle_info(id, &bundle))))
}

async fn get_bundle(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<BundleInfo>, ApiError> {
    let bundle = state.get(&id)?;
    Ok(Json(bundle_info(id, &bundle)))
}

fn score_record(bundle: &ScorerBundle, record: &SequenceRecord, opts: &ScoreOptions) -> Result<ScoreResponse, ApiError> {
    let seq = record.parse().map_err(gaitae_core::Error::from)?;
    let scored = score_sequence(bundle, &seq)?;
    let per_frame = scored.scores.by_mode(opts.mode).to_vec();
    let series = aggregate(&per_frame, opts.segment_length).map_err(gaitae_core::Error::from)?;
    let summary = IndexSummary::new(&seq.name(), opts.mode, bundle.weights(), &series);
    Ok(ScoreResponse {
        frame_indices: scored.frame_indices,
        per_frame,
        axis_errors: scored.scores.axis,
        summary,
    })
}

async fn score_with_bundle(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Body(req): Body<BundleScoreRequest>,
) -> Result<Json<ScoreResponse>, ApiError> {
    let bundle = state.get(&id)?;
    blocking(move || score_record(&bundle, &req.sequence, &req.options).map(Json)).await
}

async fn score(Body(req): Body<ScoreRequest>) -> Result<Json<ScoreResponse>, ApiError> {
    blocking(move || {
        let bundle = models_from_files(req.models)?;
        score_record(&bundle, &req.sequence, &req.options).map(Json)
    })
    .await
}

async fn eval(Body(req): Body<EvalRequest>) -> Result<Json<EvalResponse>, ApiError> {
    let (roc, report) = evaluate(&req.scores).map_err(gaitae_core::Error::from)?;
    let table = format_table([("scores", &report)]);
    Ok(Json(EvalResponse { report, roc, table }))
}

async fn filters(Body(req): Body<FiltersRequest>) -> Result<Json<FiltersResponse>, ApiError> {
    let model = req.model.into_model().map_err(gaitae_core::Error::from)?;
    let layout = req.layout.unwrap_or_default();
    let filters = export_second_layer_filters(&model, &layout).map_err(gaitae_core::Error::from)?;
    Ok(Json(FiltersResponse { filters }))
}

async fn experiment(
    State(state): State<Arc<AppState>>,
    Body(req): Body<ExperimentRequest>,
) -> Result<Json<ExperimentResponse>, ApiError> {
    blocking(move || {
        tracing::info!(name = %req.manifest.name, "running experiment");
        let out = run_experiment(&req.manifest)?;
        let models = out.models.iter().map(ModelFile::from_model).collect();
        if let Ok(bundle) = ScorerBundle::new(out.models[0].clone(), out.models[1].clone(), out.models[2].clone()) {
            state.register(bundle);
        }
        let table = out.report.table();
        Ok(Json(ExperimentResponse {
            report: out.report,
            models,
            table,
        }))
    })
    .await
}
