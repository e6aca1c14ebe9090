//! Read-only HTTP API over a pipeline output directory.
//!
//! Everything is loaded once at startup into an immutable snapshot. The
//! only mutable state is the bounded cache of what-if renders.

pub mod query;
pub mod whatif;

use axum::body::{Body, Bytes};
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use lru::LruCache;
use p3_core::detect::{read_moments, DetectConfig, Label, P3Moment};
use p3_core::geometry::Point;
use p3_core::kpi::{Group, Side};
use p3_core::model::{load_model, ModelError, SavedModel};
use p3_core::render::RenderConfig;
use p3_core::scoring::ScoreRecord;
use p3_core::store::{read_jsonl, sha256_hex, StoreError};
use query::{MomentQuery, QueryError};
use serde::Serialize;
use std::collections::HashMap;
use std::num::NonZeroUsize;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use tower_http::cors::{AllowOrigin, CorsLayer};
use whatif::{Evaluated, WhatIfRequest};

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub store_dir: PathBuf,
    pub images_dir: PathBuf,
    pub eval_dir: PathBuf,
    pub kpi_dir: PathBuf,
    pub model_path: PathBuf,
    pub detect: DetectConfig,
    pub render: RenderConfig,
    pub cors_origins: Vec<String>,
    pub cache_capacity: usize,
}

impl ServiceConfig {
    /// Conventional layout under one working directory.
    pub fn under(root: &std::path::Path) -> Self {
        Self {
            store_dir: root.join("store"),
            images_dir: root.join("images"),
            eval_dir: root.join("eval"),
            kpi_dir: root.join("kpi"),
            model_path: root.join("models").join("cnn.p3m"),
            detect: DetectConfig::default(),
            render: RenderConfig::default(),
            cors_origins: Vec::new(),
            cache_capacity: 1024,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("model: {0}")]
    Model(#[from] ModelError),
    #[error("invalid CORS origin {0:?}")]
    Cors(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub struct AppState {
    config: ServiceConfig,
    moments: Vec<P3Moment>,
    by_id: HashMap<String, usize>,
    /// Indices into `moments`, probability descending then id.
    order: Vec<usize>,
    scores: HashMap<String, f64>,
    model: Option<SavedModel>,
    cache: Mutex<LruCache<String, Arc<Evaluated>>>,
}

impl AppState {
    pub fn load(config: ServiceConfig) -> Result<Self, ServiceError> {
        let moments_file = p3_core::detect::moments_path(&config.store_dir);
        let moments = if moments_file.exists() {
            read_moments(&config.store_dir)?
        } else {
            log::warn!(
                "{} not found; serving an empty store",
                moments_file.display()
            );
            Vec::new()
        };
        let scores_file = config.eval_dir.join("scores.jsonl");
        let scores: HashMap<String, f64> = if scores_file.exists() {
            read_jsonl::<ScoreRecord>(&scores_file)?
                .into_iter()
                .map(|r| (r.moment_id, r.probability))
                .collect()
        } else {
            HashMap::new()
        };
        let model = if config.model_path.exists() {
            Some(load_model(&config.model_path)?)
        } else {
            None
        };
        let by_id = moments
            .iter()
            .enumerate()
            .map(|(i, m)| (m.moment_id.clone(), i))
            .collect();
        let mut order: Vec<usize> = (0..moments.len()).collect();
        order.sort_by(|&a, &b| {
            let pa = scores
                .get(&moments[a].moment_id)
                .copied()
                .unwrap_or(f64::NEG_INFINITY);
            let pb = scores
                .get(&moments[b].moment_id)
                .copied()
                .unwrap_or(f64::NEG_INFINITY);
            pb.total_cmp(&pa)
                .then_with(|| moments[a].moment_id.cmp(&moments[b].moment_id))
        });
        let cap = NonZeroUsize::new(config.cache_capacity.max(1)).expect("non-zero");
        Ok(Self {
            config,
            moments,
            by_id,
            order,
            scores,
            model,
            cache: Mutex::new(LruCache::new(cap)),
        })
    }

    pub fn moment_count(&self) -> usize {
        self.moments.len()
    }

    pub fn cached_whatifs(&self) -> usize {
        self.cache.lock().map(|c| c.len()).unwrap_or(0)
    }
}

// ---------------------------------------------------------------------------
// errors

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    hint: Option<String>,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, error: impl Into<String>) -> Self {
        Self {
            status,
            body: ErrorBody {
                error: error.into(),
                hint: None,
            },
        }
    }

    fn hint(mut self, hint: impl Into<String>) -> Self {
        self.body.hint = Some(hint.into());
        self
    }

    fn bad_request(msg: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, msg)
    }

    fn unprocessable(msg: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, msg)
    }

    fn not_found(msg: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, msg)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, axum::Json(self.body)).into_response()
    }
}

type ApiResult = Result<Response, ApiError>;

fn json_response<T: Serialize>(value: &T) -> Response {
    let bytes = serde_json::to_vec(value).expect("response types serialize");
    (
        [(
            header::CONTENT_TYPE,
            HeaderValue::from_static("application/json"),
        )],
        bytes,
    )
        .into_response()
}

/// Bytes with a content-hash ETag; answers 304 when the client has them.
fn tagged(bytes: Vec<u8>, content_type: &'static str, headers: &HeaderMap) -> Response {
    let etag = format!("\"{}\"", sha256_hex(&bytes));
    let fresh = headers
        .get(header::IF_NONE_MATCH)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.split(',').any(|t| t.trim() == etag));
    let etag = HeaderValue::from_str(&etag).expect("hex is a valid header value");
    if fresh {
        return (StatusCode::NOT_MODIFIED, [(header::ETAG, etag)]).into_response();
    }
    (
        [
            (header::CONTENT_TYPE, HeaderValue::from_static(content_type)),
            (header::ETAG, etag),
        ],
        Body::from(bytes),
    )
        .into_response()
}

fn read_artifact(path: PathBuf, step: &str) -> Result<Vec<u8>, ApiError> {
    std::fs::read(&path).map_err(|_| {
        ApiError::not_found(format!("{} has not been produced", path.display()))
            .hint(format!("run `{step}` first"))
    })
}

// ---------------------------------------------------------------------------
// handlers

#[derive(Serialize)]
struct Health {
    status: &'static str,
    moments: usize,
    scored: usize,
    model_loaded: bool,
}

async fn health(State(s): State<Arc<AppState>>) -> Response {
    json_response(&Health {
        status: "ok",
        moments: s.moments.len(),
        scored: s.scores.len(),
        model_loaded: s.model.is_some(),
    })
}

#[derive(Debug, Serialize)]
struct MomentSummary<'a> {
    moment_id: &'a str,
    match_id: &'a str,
    team_id: &'a str,
    player_id: &'a str,
    period: u32,
    minute: u32,
    second: u32,
    origin: Point,
    under_pressure: bool,
    label: Label,
    probability: Option<f64>,
    hull_area: f64,
}

#[derive(Serialize)]
struct MomentPage<'a> {
    total: usize,
    offset: usize,
    limit: usize,
    items: Vec<MomentSummary<'a>>,
}

fn matches_query(q: &MomentQuery, m: &P3Moment, p: Option<f64>) -> bool {
    q.team.as_ref().is_none_or(|t| *t == m.team_id)
        && q.player.as_ref().is_none_or(|t| *t == m.player_id)
        && q.match_id.as_ref().is_none_or(|t| *t == m.match_id)
        && q.label.is_none_or(|l| l == m.label)
        && q.under_pressure.is_none_or(|u| u == m.under_pressure)
        && q.zone.0 <= m.origin.x
        && m.origin.x <= q.zone.1
        && (!q.probability_filtered()
            || p.is_some_and(|p| q.probability.0 <= p && p <= q.probability.1))
}

async fn list_moments(
    State(s): State<Arc<AppState>>,
    Query(params): Query<HashMap<String, String>>,
) -> ApiResult {
    let q = MomentQuery::parse(&params).map_err(|e| match e {
        QueryError::Malformed(m) => ApiError::bad_request(m),
        QueryError::Invalid(m) => ApiError::unprocessable(m),
    })?;
    let mut total = 0;
    let mut items = Vec::new();
    for &i in &s.order {
        let m = &s.moments[i];
        let p = s.scores.get(&m.moment_id).copied();
        if !matches_query(&q, m, p) {
            continue;
        }
        if total >= q.offset && items.len() < q.limit {
            items.push(MomentSummary {
                moment_id: &m.moment_id,
                match_id: &m.match_id,
                team_id: &m.team_id,
                player_id: &m.player_id,
                period: m.period,
                minute: m.minute,
                second: m.second,
                origin: m.origin,
                under_pressure: m.under_pressure,
                label: m.label,
                probability: p,
                hull_area: m.hull.area(),
            });
        }
        total += 1;
    }
    Ok(json_response(&MomentPage {
        total,
        offset: q.offset,
        limit: q.limit,
        items,
    }))
}

fn find<'a>(s: &'a AppState, id: &str) -> Result<&'a P3Moment, ApiError> {
    s.by_id
        .get(id)
        .map(|&i| &s.moments[i])
        .ok_or_else(|| ApiError::not_found(format!("unknown moment {id}")))
}

#[derive(Serialize)]
struct MomentDetail<'a> {
    #[serde(flatten)]
    moment: &'a P3Moment,
    probability: Option<f64>,
    hull_area: f64,
    image: String,
}

async fn get_moment(State(s): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    let m = find(&s, &id)?;
    Ok(json_response(&MomentDetail {
        moment: m,
        probability: s.scores.get(&id).copied(),
        hull_area: m.hull.area(),
        image: format!("/api/v1/moments/{id}/image.png"),
    }))
}

async fn get_moment_image(
    State(s): State<Arc<AppState>>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> ApiResult {
    let m = find(&s, &id)?;
    let bytes = read_artifact(
        s.config.images_dir.join(format!("{}.png", m.moment_id)),
        "p3 render",
    )?;
    Ok(tagged(bytes, "image/png", &headers))
}

async fn post_whatif(
    State(s): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult {
    let m = find(&s, &id)?;
    let request: WhatIfRequest = serde_json::from_slice(&body)
        .map_err(|e| ApiError::bad_request(format!("malformed what-if request: {e}")))?;
    request.validate(m).map_err(ApiError::unprocessable)?;
    let model = s.model.as_ref().ok_or_else(|| {
        ApiError::not_found("no trained model is loaded").hint("run `p3 train` first")
    })?;
    let key = request.request_id(&m.moment_id);
    let cached = s.cache.lock().expect("cache lock").get(&key).cloned();
    let evaluated = match cached {
        Some(e) => e,
        None => {
            let e = whatif::evaluate(
                m,
                &request,
                s.scores.get(&id).copied(),
                &s.config.detect,
                &s.config.render,
                model,
            )
            .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
            let e = Arc::new(e);
            s.cache.lock().expect("cache lock").put(key, e.clone());
            e
        }
    };
    Ok(json_response(&evaluated.result))
}

async fn get_whatif_image(
    State(s): State<Arc<AppState>>,
    Path(request_id): Path<String>,
    headers: HeaderMap,
) -> ApiResult {
    let hit = s
        .cache
        .lock()
        .expect("cache lock")
        .get(&request_id)
        .cloned();
    let png = hit.and_then(|e| e.png.clone()).ok_or_else(|| {
        ApiError::not_found(format!("no rendered what-if {request_id}"))
            .hint("POST the what-if request again")
    })?;
    Ok(tagged(png, "image/png", &headers))
}

fn wants_csv(params: &HashMap<String, String>) -> Result<bool, ApiError> {
    match params.get("format").map(String::as_str) {
        None | Some("json") => Ok(false),
        Some("csv") => Ok(true),
        Some(f) => Err(ApiError::bad_request(format!(
            "format: unknown value {f:?}"
        ))),
    }
}

fn only_keys(params: &HashMap<String, String>, allowed: &[&str]) -> Result<(), ApiError> {
    match params.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(ApiError::bad_request(format!("unknown parameter {k}"))),
        None => Ok(()),
    }
}

async fn kpi_players(
    State(s): State<Arc<AppState>>,
    Query(params): Query<HashMap<String, String>>,
    headers: HeaderMap,
) -> ApiResult {
    only_keys(&params, &["group", "format"])?;
    let raw = params
        .get("group")
        .ok_or_else(|| ApiError::bad_request("missing group parameter"))?;
    let group: Group = raw
        .parse()
        .map_err(|e: p3_core::kpi::KpiError| ApiError::bad_request(e.to_string()))?;
    let csv = wants_csv(&params)?;
    let ext = if csv { "csv" } else { "json" };
    let bytes = read_artifact(
        s.config.kpi_dir.join(format!("players_{group}.{ext}")),
        &format!("p3 kpi --group {group}"),
    )?;
    Ok(tagged(
        bytes,
        if csv { "text/csv" } else { "application/json" },
        &headers,
    ))
}

async fn kpi_teams(
    State(s): State<Arc<AppState>>,
    Query(params): Query<HashMap<String, String>>,
    headers: HeaderMap,
) -> ApiResult {
    only_keys(&params, &["side", "format"])?;
    let raw = params
        .get("side")
        .ok_or_else(|| ApiError::bad_request("missing side parameter"))?;
    let side: Side = raw
        .parse()
        .map_err(|e: p3_core::kpi::KpiError| ApiError::bad_request(e.to_string()))?;
    let csv = wants_csv(&params)?;
    let ext = if csv { "csv" } else { "json" };
    let bytes = read_artifact(
        s.config
            .kpi_dir
            .join(format!("teams_{}.{ext}", side.as_str())),
        "p3 kpi --teams",
    )?;
    Ok(tagged(
        bytes,
        if csv { "text/csv" } else { "application/json" },
        &headers,
    ))
}

const MODEL_ARTIFACTS: [&str; 4] = ["roc", "calibration", "histogram", "confusion"];

async fn model_artifact(
    State(s): State<Arc<AppState>>,
    Path(name): Path<String>,
    headers: HeaderMap,
) -> ApiResult {
    if !MODEL_ARTIFACTS.contains(&name.as_str()) {
        return Err(ApiError::not_found(format!(
            "unknown model artifact {name:?} (expected one of {})",
            MODEL_ARTIFACTS.join(", ")
        )));
    }
    let bytes = read_artifact(s.config.eval_dir.join(format!("{name}.json")), "p3 eval")?;
    Ok(tagged(bytes, "application/json", &headers))
}

async fn fallback() -> ApiError {
    ApiError::not_found("no such endpoint")
}

pub fn router(state: Arc<AppState>) -> Result<Router, ServiceError> {
    let origins = state
        .config
        .cors_origins
        .iter()
        .map(|o| HeaderValue::from_str(o).map_err(|_| ServiceError::Cors(o.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    let api = Router::new()
        .route("/health", get(health))
        .route("/moments", get(list_moments))
        .route("/moments/{id}", get(get_moment))
        .route("/moments/{id}/image.png", get(get_moment_image))
        .route("/moments/{id}/whatif", post(post_whatif))
        .route("/whatif/{request_id}/image.png", get(get_whatif_image))
        .route("/kpi/players", get(kpi_players))
        .route("/kpi/teams", get(kpi_teams))
        .route("/model/{name}", get(model_artifact));
    let mut app = Router::new()
        .nest("/api/v1", api)
        .fallback(fallback)
        .with_state(state);
    if !origins.is_empty() {
        app = app.layer(
            CorsLayer::new()
                .allow_origin(AllowOrigin::list(origins))
                .allow_methods([Method::GET, Method::POST])
                .allow_headers([header::CONTENT_TYPE, header::IF_NONE_MATCH])
                .expose_headers([header::ETAG]),
        );
    }
    Ok(app)
}

/// Bind and serve until Ctrl-C.
pub async fn serve(config: ServiceConfig, addr: &str) -> Result<(), ServiceError> {
    let state = Arc::new(AppState::load(config)?);
    log::info!("serving {} moments on {addr}", state.moment_count());
    let app = router(state)?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
