use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Body;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};

use super::datasets::Dataset;
use super::jobs::{now, SubmitError, Target};
use super::AppState;
use crate::annotate::{apply_mask, lasso_fill, magic_wand, morph_snakes_acwe, MaskMode, PlaneConnectivity, Polygon, RleMask, SnakeParams};
use crate::chunk::ExecOptions;
use crate::error::Error;
use crate::ledger::ledger_snapshot;
use crate::quantify::label_metrics_chunked;
use crate::registry::{self, Params, Role, CATALOG};
use crate::slice::{encode_gray_png, encode_rgba_png, extract_plane, plane_dims, window_plane, Axis, Image};
use crate::volume::{default_color, DType, LabelVolume};

type AppResult = Result<Response, ApiError>;

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError { status, message: message.into() }
    }

    fn not_found(what: &str, id: u64) -> Self {
        Self::new(StatusCode::NOT_FOUND, format!("no {what} with id {id}"))
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Bounds(_) => StatusCode::NOT_FOUND,
            e if e.is_usage() => StatusCode::UNPROCESSABLE_ENTITY,
            Error::Io { .. } | Error::CorruptInput(_) | Error::UnsupportedFormat(_) => StatusCode::UNPROCESSABLE_ENTITY,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

/// Runs blocking file or compute work off the async executor.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, Error> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
        .map_err(ApiError::from)
}

fn body<T: serde::de::DeserializeOwned>(value: Value) -> Result<T, ApiError> {
    serde_json::from_value(value).map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))
}

fn png(bytes: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, "image/png")], bytes).into_response()
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/ops", get(ops))
        .route("/memory", get(memory))
        .route("/datasets", post(register).get(list_datasets))
        .route("/datasets/{id}", get(dataset_info))
        .route("/datasets/{id}/slice/{axis}/{index}", get(slice_png))
        .route("/datasets/{id}/labels/{axis}/{index}", get(labels_png))
        .route("/datasets/{id}/annotate/{tool}", post(annotate))
        .route("/datasets/{id}/undo", post(undo))
        .route("/datasets/{id}/metrics", get(metrics))
        .route("/jobs", post(submit).get(list_jobs))
        .route("/jobs/{id}", get(job))
        .route("/jobs/{id}/cancel", post(cancel))
        .with_state(state)
}

async fn health(State(st): State<Arc<AppState>>) -> Json<Value> {
    Json(json!({
        "status": "ok",
        "workers": st.config.workers,
        "queued": st.board.queued(),
    }))
}

async fn ops() -> Json<Value> {
    Json(json!(CATALOG))
}

async fn memory(State(st): State<Arc<AppState>>) -> Json<Value> {
    Json(json!({
        "ledger": ledger_snapshot(),
        "budget": st.config.budget,
        "worker_usable_bytes": st.config.worker_budget().usable_bytes,
    }))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RegisterBody {
    #[serde(rename = "data-path", alias = "data_path")]
    data_path: PathBuf,
    #[serde(rename = "meta-path", alias = "meta_path")]
    meta_path: Option<PathBuf>,
}

async fn register(State(st): State<Arc<AppState>>, Json(raw): Json<Value>) -> AppResult {
    let req: RegisterBody = body(raw)?;
    let id = st.allocate_dataset_id();
    let dir = st.workdir.join(format!("dataset-{id}"));
    let keep = st.config.snapshots;
    let ds = blocking(move || {
        let meta = req.meta_path.unwrap_or_else(|| crate::io::meta_path_for(&req.data_path));
        Dataset::register(id, &req.data_path, &meta, dir, keep, now())
    })
    .await?;
    let info = ds.info();
    st.datasets.lock().unwrap_or_else(|e| e.into_inner()).insert(id, Arc::new(ds));
    Ok((StatusCode::CREATED, Json(info)).into_response())
}

async fn list_datasets(State(st): State<Arc<AppState>>) -> Json<Value> {
    let all: Vec<Arc<Dataset>> = st.datasets.lock().unwrap_or_else(|e| e.into_inner()).values().cloned().collect();
    Json(json!(all.iter().map(|d| d.info()).collect::<Vec<_>>()))
}

fn find(st: &AppState, id: u64) -> Result<Arc<Dataset>, ApiError> {
    st.dataset(id).ok_or_else(|| ApiError::not_found("dataset", id))
}

async fn dataset_info(State(st): State<Arc<AppState>>, Path(id): Path<u64>) -> AppResult {
    Ok(Json(find(&st, id)?.info()).into_response())
}

#[derive(Deserialize)]
struct Window {
    low: Option<f64>,
    high: Option<f64>,
}

fn plane_path(axis: &str) -> Result<Axis, ApiError> {
    Axis::parse(axis).map_err(|e| ApiError::new(StatusCode::NOT_FOUND, e.to_string()))
}

async fn slice_png(State(st): State<Arc<AppState>>, Path((id, axis, index)): Path<(u64, String, usize)>, Query(w): Query<Window>) -> AppResult {
    let ds = find(&st, id)?;
    let axis = plane_path(&axis)?;
    let bytes = blocking(move || {
        let volume = ds.lock().volume.clone();
        let plane = volume.file.read_plane(axis, index)?;
        let (lo, hi) = plane.default_window();
        let window = (w.low.unwrap_or(lo), w.high.unwrap_or(hi));
        encode_gray_png(&window_plane(&plane, window)?)
    })
    .await?;
    Ok(png(bytes))
}

async fn labels_png(State(st): State<Arc<AppState>>, Path((id, axis, index)): Path<(u64, String, usize)>) -> AppResult {
    let ds = find(&st, id)?;
    let axis = plane_path(&axis)?;
    let bytes = blocking(move || {
        let plane = ds.lock().labels.read_plane(axis, index)?;
        let (h, w) = (plane.shape().y, plane.shape().x);
        let mut rgba = Vec::with_capacity(h * w * 4);
        for &l in plane.typed::<u32>()? {
            rgba.extend_from_slice(&default_color(l));
        }
        encode_rgba_png(w, h, &rgba)
    })
    .await?;
    Ok(png(bytes))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WandBody {
    axis: Axis,
    index: usize,
    seed: [usize; 2],
    tolerance: f64,
    #[serde(default = "four")]
    connectivity: u32,
    #[serde(default = "one")]
    label: u32,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LassoBody {
    axis: Axis,
    index: usize,
    vertices: Vec<[f64; 2]>,
    #[serde(default = "one")]
    label: u32,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SnakesBody {
    init: RleMask,
    #[serde(default)]
    params: SnakeParams,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ApplyBody {
    mask: RleMask,
    #[serde(default = "set")]
    mode: String,
}

fn four() -> u32 {
    4
}

fn one() -> u32 {
    1
}

fn set() -> String {
    "set".into()
}

fn intensity_plane(ds: &Dataset, axis: Axis, index: usize) -> Result<Image<f64>, Error> {
    let volume = ds.lock().volume.clone();
    extract_plane(&volume.file.read_plane(axis, index)?, Axis::Z, 0)
}

fn commit_mask(ds: &Dataset, mask: &RleMask, mode: MaskMode) -> Result<Value, Error> {
    mask.validate()?;
    let mut files = ds.lock();
    let shape = files.labels.meta().shape;
    crate::slice::check_index(shape, mask.axis, mask.index)?;
    let (h, w) = plane_dims(shape, mask.axis);
    if (mask.height, mask.width) != (h, w) {
        return Err(Error::Shape(format!("mask is {}x{}, plane is {h}x{w}", mask.height, mask.width)));
    }
    let plane = files.labels.read_plane(mask.axis, mask.index)?;
    let mut labels = LabelVolume::from_volume(plane)?;
    let local = RleMask { axis: Axis::Z, index: 0, ..mask.clone() };
    let changed = apply_mask(&mut labels, &local, mode)?;
    if changed > 0 {
        // the snapshot must hold the state before this write
        ds.snapshot(&mut files)?;
        files.labels.write_plane(mask.axis, mask.index, labels.as_volume())?;
        files.version += 1;
    }
    Ok(json!({ "changed": changed, "label_version": files.version }))
}

async fn annotate(State(st): State<Arc<AppState>>, Path((id, tool)): Path<(u64, String)>, Json(raw): Json<Value>) -> AppResult {
    let ds = find(&st, id)?;
    let out: Value = match tool.replace('_', "-").as_str() {
        "magic-wand" => {
            let req: WandBody = body(raw)?;
            blocking(move || {
                let img = intensity_plane(&ds, req.axis, req.index)?;
                let conn = PlaneConnectivity::from_number(req.connectivity)?;
                let bits = magic_wand(&img, (req.seed[0], req.seed[1]), req.tolerance, conn)?;
                let mask = RleMask::encode(req.axis, req.index, img.height, img.width, req.label, &bits)?;
                Ok(json!(mask))
            })
            .await?
        }
        "lasso" | "lasso-fill" => {
            let req: LassoBody = body(raw)?;
            blocking(move || {
                let shape = ds.lock().labels.meta().shape;
                crate::slice::check_index(shape, req.axis, req.index)?;
                let (h, w) = plane_dims(shape, req.axis);
                let poly = Polygon::new(req.vertices.iter().map(|v| (v[0], v[1])).collect())?;
                let bits = lasso_fill(&poly, h, w);
                Ok(json!(RleMask::encode(req.axis, req.index, h, w, req.label, &bits)?))
            })
            .await?
        }
        "snakes" => {
            let req: SnakesBody = body(raw)?;
            blocking(move || {
                req.init.validate()?;
                let img = intensity_plane(&ds, req.init.axis, req.init.index)?;
                let (mask, iterations) = morph_snakes_acwe(&img, &req.init, &req.params)?;
                Ok(json!({ "mask": mask, "iterations": iterations }))
            })
            .await?
        }
        "apply-mask" => {
            let req: ApplyBody = body(raw)?;
            let mode = MaskMode::parse(&req.mode)?;
            blocking(move || commit_mask(&ds, &req.mask, mode)).await?
        }
        other => return Err(ApiError::new(StatusCode::NOT_FOUND, format!("unknown annotation tool {other:?}"))),
    };
    Ok(Json(out).into_response())
}

async fn undo(State(st): State<Arc<AppState>>, Path(id): Path<u64>) -> AppResult {
    let ds = find(&st, id)?;
    let out = blocking(move || {
        let restored = ds.undo()?;
        Ok(json!({ "restored": restored, "label_version": ds.lock().version }))
    })
    .await?;
    Ok(Json(out).into_response())
}

#[derive(Deserialize)]
struct MetricsQuery {
    format: Option<String>,
}

async fn metrics(State(st): State<Arc<AppState>>, Path(id): Path<u64>, Query(q): Query<MetricsQuery>) -> AppResult {
    let ds = find(&st, id)?;
    let json_out = match q.format.as_deref() {
        None | Some("csv") => false,
        Some("json") => true,
        Some(other) => return Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, format!("unknown format {other:?}"))),
    };
    let budget = st.config.worker_budget();
    let table = blocking(move || {
        let files = ds.lock();
        let (table, _) = label_metrics_chunked(&files.labels, &budget, &ExecOptions::default())?;
        Ok(table)
    })
    .await?;
    if json_out {
        Ok(Json(table).into_response())
    } else {
        let csv = table.to_csv()?;
        Ok(([(header::CONTENT_TYPE, "text/csv")], Body::from(csv)).into_response())
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SubmitBody {
    dataset: u64,
    op: String,
    #[serde(default)]
    params: Value,
    target: Option<Target>,
}

async fn submit(State(st): State<Arc<AppState>>, Json(raw): Json<Value>) -> AppResult {
    let req: SubmitBody = body(raw)?;
    let ds = find(&st, req.dataset)?;
    let params = match &req.params {
        Value::Null => Params::default(),
        v => Params::from_json(v)?,
    };
    let op = registry::build(&req.op, &params)?;
    let volume_dtype = ds.lock().volume.file.meta().dtype;
    let dtypes: Vec<DType> = op
        .info
        .inputs
        .iter()
        .map(|r| if *r == Role::Labels { DType::U32 } else { volume_dtype })
        .collect();
    let out = op.out_dtype(&dtypes)?;
    let natural = if out == DType::U32 { Target::Labels } else { Target::Volume };
    let target = req.target.unwrap_or(natural);
    if target != natural {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            format!("{} produces {out} output, which cannot replace the dataset {target:?}", req.op).to_lowercase(),
        ));
    }
    match st.board.submit(ds, op, target) {
        Ok(job) => Ok((StatusCode::ACCEPTED, Json(job)).into_response()),
        Err(SubmitError::QueueFull(n)) => Err(ApiError::new(StatusCode::TOO_MANY_REQUESTS, format!("job queue is full ({n} queued)"))),
        Err(SubmitError::ShuttingDown) => Err(ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "service is shutting down")),
    }
}

async fn list_jobs(State(st): State<Arc<AppState>>) -> Json<Value> {
    Json(json!(st.board.list()))
}

async fn job(State(st): State<Arc<AppState>>, Path(id): Path<u64>) -> AppResult {
    let job = st.board.get(id).ok_or_else(|| ApiError::not_found("job", id))?;
    Ok(Json(job).into_response())
}

async fn cancel(State(st): State<Arc<AppState>>, Path(id): Path<u64>) -> AppResult {
    let state = st.board.cancel(id).ok_or_else(|| ApiError::not_found("job", id))?;
    Ok(Json(json!({ "id": id, "state": state })).into_response())
}
