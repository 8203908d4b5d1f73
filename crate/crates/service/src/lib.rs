// SPDX-License-Identifier: Apache-2.0

//! HTTP/JSON front end for a live pipeline.
//!
//! One [`Controller`] sits behind a mutex; every request takes the lock for
//! its duration, so packets and control operations are serialized exactly as
//! they would be on a single pipeline.

use std::sync::Arc;

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use tokio::sync::Mutex;

use rmtiso_core::api::*;
use rmtiso_core::compiler::{compile_standalone, emit_reconfig_packets, CompileError};
use rmtiso_core::config::{ConfigWrite, Resource};
use rmtiso_core::control::manager::{ModuleReport, ModuleSummary};
use rmtiso_core::control::{reg_read, reg_write, Controller, ManagerError, Register};
use rmtiso_core::engine::PacketOutcome;
use rmtiso_core::harness::{self, RunReport};
use rmtiso_core::system::SystemConfig;
use rmtiso_core::RawPacket;

pub type Shared = Arc<Mutex<Controller>>;

pub fn shared(ctl: Controller) -> Shared {
    Arc::new(Mutex::new(ctl))
}

pub fn app(state: Shared) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/system", get(system))
        .route("/compile", post(compile))
        .route("/modules", get(list_modules).post(load_module))
        .route("/modules/{slot}", get(get_module).put(update_module).delete(unload_module))
        .route("/modules/{slot}/counters", get(counters))
        .route("/modules/{slot}/registers/{name}", get(register))
        .route("/packets", post(packet))
        .route("/packets/batch", post(batch))
        .route("/entries", post(install_entry).put(modify_entry))
        .route("/entries/{resource}/{index}", get(read_entry))
        .route("/filter/{register}", get(read_filter).put(write_filter))
        .route("/stats", put(set_stats))
        .route("/state", get(state_dump))
        .route("/scenarios/run", post(run_scenario))
        .with_state(state)
}

/// Serves [`app`] on `listener` until `shutdown` resolves.
pub async fn serve_until(
    listener: tokio::net::TcpListener,
    state: Shared,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, app(state)).with_graceful_shutdown(shutdown).await
}

pub async fn serve(listener: tokio::net::TcpListener, state: Shared) -> std::io::Result<()> {
    serve_until(listener, state, std::future::pending()).await
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, kind: &str, error: impl ToString) -> Self {
        ApiError {
            status,
            body: ErrorBody { kind: kind.into(), error: error.to_string(), exit_code: None, compile: None },
        }
    }

    fn bad_request(error: impl ToString) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", error)
    }

    fn not_found(error: impl ToString) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", error)
    }
}

impl From<CompileError> for ApiError {
    fn from(e: CompileError) -> Self {
        let mut err = ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "compile", &e);
        err.body.exit_code = Some(e.exit_code());
        err.body.compile = Some(e);
        err
    }
}

impl From<ManagerError> for ApiError {
    fn from(e: ManagerError) -> Self {
        use ManagerError::*;
        let (status, kind) = match &e {
            Compile(c) => return c.clone().into(),
            System(_) => (StatusCode::UNPROCESSABLE_ENTITY, "system"),
            RegistryFull
            | SlotInUse(_)
            | VidInUse(_)
            | ReservedVid(_)
            | CamExhausted { .. }
            | MemoryExhausted { .. } => (StatusCode::CONFLICT, "capacity"),
            Busy(_) => (StatusCode::CONFLICT, "busy"),
            UnknownSlot(_) | UnknownRegister(_) => (StatusCode::NOT_FOUND, "not_found"),
            Control(_) | Rejected(_) | Mismatch(_) => (StatusCode::INTERNAL_SERVER_ERROR, "reconfiguration"),
        };
        ApiError::new(status, kind, e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

async fn health(State(s): State<Shared>) -> Json<Health> {
    let ctl = s.lock().await;
    Json(Health { status: "ok".into(), modules: ctl.modules().count() })
}

async fn system(State(s): State<Shared>) -> Json<SystemConfig> {
    Json(s.lock().await.system.clone())
}

async fn compile(State(s): State<Shared>, Json(req): Json<CompileRequest>) -> ApiResult<CompileResponse> {
    let cookie = match req.cookie {
        Some(c) => c,
        None => s.lock().await.cookie(),
    };
    let cm = compile_standalone(&req.source, req.vid)?;
    let packets = emit_reconfig_packets(&cm, cookie).iter().map(RawPacket::to_hex).collect();
    Ok(Json(CompileResponse { name: cm.name.clone(), dump: cm.dump(), packets }))
}

async fn list_modules(State(s): State<Shared>) -> Json<Vec<ModuleSummary>> {
    Json(s.lock().await.modules().map(|m| m.summary()).collect())
}

async fn load_module(
    State(s): State<Shared>,
    Json(req): Json<LoadRequest>,
) -> Result<(StatusCode, Json<ModuleSummary>), ApiError> {
    let mut ctl = s.lock().await;
    let slot = match req.slot {
        Some(slot) => ctl.load_module_at(&req.source, req.vid, slot)?,
        None => ctl.load_module(&req.source, req.vid)?,
    };
    tracing::info!(slot, vid = req.vid, "module loaded");
    Ok((StatusCode::CREATED, Json(ctl.module(slot).expect("just loaded").summary())))
}

fn summary(ctl: &Controller, slot: u8) -> ApiResult<ModuleSummary> {
    ctl.module(slot).map(|m| Json(m.summary())).ok_or_else(|| ManagerError::UnknownSlot(slot).into())
}

async fn get_module(State(s): State<Shared>, Path(slot): Path<u8>) -> ApiResult<ModuleSummary> {
    summary(&*s.lock().await, slot)
}

async fn update_module(
    State(s): State<Shared>,
    Path(slot): Path<u8>,
    Json(req): Json<UpdateRequest>,
) -> ApiResult<ModuleSummary> {
    let mut ctl = s.lock().await;
    ctl.update_module(slot, &req.source)?;
    tracing::info!(slot, "module updated");
    summary(&ctl, slot)
}

async fn unload_module(State(s): State<Shared>, Path(slot): Path<u8>) -> Result<StatusCode, ApiError> {
    s.lock().await.unload_module(slot)?;
    tracing::info!(slot, "module unloaded");
    Ok(StatusCode::NO_CONTENT)
}

async fn counters(State(s): State<Shared>, Path(slot): Path<u8>) -> ApiResult<ModuleReport> {
    if usize::from(slot) >= rmtiso_core::config::MAX_MODULES {
        return Err(ApiError::not_found(format!("slot {slot} out of range")));
    }
    Ok(Json(s.lock().await.report(slot)))
}

async fn register(State(s): State<Shared>, Path((slot, name)): Path<(u8, String)>) -> ApiResult<Vec<u32>> {
    Ok(Json(s.lock().await.read_register(slot, &name)?))
}

fn raw(req: &PacketRequest) -> Result<RawPacket, ApiError> {
    let mut pkt = RawPacket::from_hex(&req.hex).map_err(|e| ApiError::bad_request(format!("packet hex: {e}")))?;
    pkt.ingress_port = req.ingress_port;
    Ok(pkt)
}

async fn packet(State(s): State<Shared>, Json(req): Json<PacketRequest>) -> ApiResult<PacketOutcome> {
    let pkt = raw(&req)?;
    Ok(Json(s.lock().await.process(pkt)))
}

async fn batch(State(s): State<Shared>, Json(req): Json<BatchRequest>) -> ApiResult<Vec<PacketOutcome>> {
    let pkts = req.packets.iter().map(raw).collect::<Result<Vec<_>, _>>()?;
    let mut ctl = s.lock().await;
    Ok(Json(pkts.into_iter().map(|p| ctl.process(p)).collect()))
}

fn parse_line(req: &EntryRequest) -> Result<ConfigWrite, ApiError> {
    ConfigWrite::parse_dump_line(&req.line).map_err(ApiError::bad_request)
}

async fn install_entry(State(s): State<Shared>, Json(req): Json<EntryRequest>) -> ApiResult<PacketOutcome> {
    let write = parse_line(&req)?;
    Ok(Json(s.lock().await.send_entry(write)))
}

async fn modify_entry(State(s): State<Shared>, Json(req): Json<EntryRequest>) -> ApiResult<PacketOutcome> {
    let write = parse_line(&req)?;
    let mut ctl = s.lock().await;
    let current = ctl.state.read_entry(write.resource, write.index);
    if current.is_none_or(|e| e.encode().iter().all(|&b| b == 0)) {
        return Err(ApiError::not_found(format!("{} {} holds no entry to modify", write.resource, write.index)));
    }
    Ok(Json(ctl.send_entry(write)))
}

async fn read_entry(State(s): State<Shared>, Path((resource, index)): Path<(String, u8)>) -> ApiResult<EntryRequest> {
    let res: Resource = resource.parse().map_err(ApiError::bad_request)?;
    let ctl = s.lock().await;
    let entry =
        ctl.state.read_entry(res, index).ok_or_else(|| ApiError::not_found(format!("{res} has no row {index}")))?;
    Ok(Json(EntryRequest { line: ConfigWrite::new(res, index, entry).dump_line() }))
}

fn parse_register(name: &str) -> Result<Register, ApiError> {
    name.parse().map_err(ApiError::not_found)
}

async fn read_filter(State(s): State<Shared>, Path(name): Path<String>) -> ApiResult<RegisterValue> {
    let register = parse_register(&name)?;
    let value = reg_read(&s.lock().await.state, register);
    Ok(Json(RegisterValue { register, value }))
}

async fn write_filter(
    State(s): State<Shared>,
    Path(name): Path<String>,
    Json(req): Json<RegisterValue>,
) -> ApiResult<RegisterValue> {
    let register = parse_register(&name)?;
    if register != req.register {
        return Err(ApiError::bad_request("register in body does not match path"));
    }
    let mut ctl = s.lock().await;
    reg_write(&mut ctl.state, register, req.value).map_err(|e| ApiError::new(StatusCode::FORBIDDEN, "read_only", e))?;
    Ok(Json(RegisterValue { register, value: reg_read(&ctl.state, register) }))
}

async fn set_stats(State(s): State<Shared>, Json(req): Json<StatsRequest>) -> Json<StatsRequest> {
    s.lock().await.set_stats(req.link_util, req.queue_len);
    Json(req)
}

async fn state_dump(State(s): State<Shared>) -> Json<StateDump> {
    let ctl = s.lock().await;
    Json(StateDump {
        reconfig_counter: reg_read(&ctl.state, Register::Counter),
        update_bitmap: reg_read(&ctl.state, Register::Bitmap),
        lines: ctl.state.dump_lines(),
    })
}

/// Runs on a private pipeline; the shared one is untouched.
async fn run_scenario(Json(req): Json<ScenarioRequest>) -> ApiResult<RunReport> {
    if let Some(path) = req.scenario.unresolved() {
        return Err(ApiError::bad_request(format!("program {path:?} must be sent inline")));
    }
    req.scenario.system.validate().map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "system", e))?;
    let report = tokio::task::spawn_blocking(move || harness::run(&req.scenario, req.options))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e))?;
    report.map(Json).map_err(|e| match e {
        harness::HarnessError::Manager { source: ManagerError::Compile(c), .. } => c.into(),
        e => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "scenario", e),
    })
}
