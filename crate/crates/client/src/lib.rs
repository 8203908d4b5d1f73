// SPDX-License-Identifier: Apache-2.0

//! Typed HTTP client for the pipeline service.

use reqwest::{Method, StatusCode};
use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use rmtiso_core::api::*;
use rmtiso_core::control::manager::{ModuleReport, ModuleSummary};
use rmtiso_core::control::Register;
use rmtiso_core::engine::PacketOutcome;
use rmtiso_core::harness::{RunOptions, RunReport, Scenario};
use rmtiso_core::system::SystemConfig;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error(transparent)]
    Http(#[from] reqwest::Error),
    #[error("{status}: {}", body.error)]
    Api { status: StatusCode, body: ErrorBody },
}

impl ClientError {
    /// Compiler exit code, when the server rejected a program.
    pub fn exit_code(&self) -> Option<i32> {
        match self {
            ClientError::Api { body, .. } => body.exit_code,
            ClientError::Http(_) => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, ClientError>;

#[derive(Debug, Clone)]
pub struct Client {
    base: String,
    http: reqwest::Client,
}

impl Client {
    pub fn new(base: impl Into<String>) -> Self {
        Client { base: base.into().trim_end_matches('/').to_string(), http: reqwest::Client::new() }
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    async fn send<B: Serialize, T: DeserializeOwned>(&self, method: Method, path: &str, body: Option<&B>) -> Result<T> {
        let mut req = self.http.request(method, format!("{}{path}", self.base));
        if let Some(b) = body {
            req = req.json(b);
        }
        let resp = req.send().await?;
        let status = resp.status();
        if status.is_success() {
            if status == StatusCode::NO_CONTENT {
                return Ok(serde_json::from_value(serde_json::Value::Null).expect("unit response"));
            }
            return Ok(resp.json().await?);
        }
        let text = resp.text().await?;
        let body = serde_json::from_str(&text).unwrap_or(ErrorBody {
            kind: "http".into(),
            error: text,
            exit_code: None,
            compile: None,
        });
        Err(ClientError::Api { status, body })
    }

    async fn get<T: DeserializeOwned>(&self, path: &str) -> Result<T> {
        self.send::<(), T>(Method::GET, path, None).await
    }

    pub async fn health(&self) -> Result<Health> {
        self.get("/health").await
    }

    pub async fn system(&self) -> Result<SystemConfig> {
        self.get("/system").await
    }

    pub async fn compile(&self, req: &CompileRequest) -> Result<CompileResponse> {
        self.send(Method::POST, "/compile", Some(req)).await
    }

    pub async fn modules(&self) -> Result<Vec<ModuleSummary>> {
        self.get("/modules").await
    }

    pub async fn module(&self, slot: u8) -> Result<ModuleSummary> {
        self.get(&format!("/modules/{slot}")).await
    }

    pub async fn load(&self, source: &str, vid: u16, slot: Option<u8>) -> Result<ModuleSummary> {
        let req = LoadRequest { source: source.into(), vid, slot };
        self.send(Method::POST, "/modules", Some(&req)).await
    }

    pub async fn update(&self, slot: u8, source: &str) -> Result<ModuleSummary> {
        let req = UpdateRequest { source: source.into() };
        self.send(Method::PUT, &format!("/modules/{slot}"), Some(&req)).await
    }

    pub async fn unload(&self, slot: u8) -> Result<()> {
        self.send::<(), ()>(Method::DELETE, &format!("/modules/{slot}"), None).await
    }

    /// read-counters
    pub async fn counters(&self, slot: u8) -> Result<ModuleReport> {
        self.get(&format!("/modules/{slot}/counters")).await
    }

    pub async fn register(&self, slot: u8, name: &str) -> Result<Vec<u32>> {
        self.get(&format!("/modules/{slot}/registers/{name}")).await
    }

    pub async fn inject(&self, hex: &str, ingress_port: u8) -> Result<PacketOutcome> {
        let req = PacketRequest { hex: hex.into(), ingress_port };
        self.send(Method::POST, "/packets", Some(&req)).await
    }

    pub async fn inject_batch(&self, packets: Vec<PacketRequest>) -> Result<Vec<PacketOutcome>> {
        self.send(Method::POST, "/packets/batch", Some(&BatchRequest { packets })).await
    }

    /// install-entry: `line` is `<resource> <index> <hex>`.
    pub async fn install_entry(&self, line: &str) -> Result<PacketOutcome> {
        self.send(Method::POST, "/entries", Some(&EntryRequest { line: line.into() })).await
    }

    /// modify-entry: fails if the row holds no entry yet.
    pub async fn modify_entry(&self, line: &str) -> Result<PacketOutcome> {
        self.send(Method::PUT, "/entries", Some(&EntryRequest { line: line.into() })).await
    }

    pub async fn read_entry(&self, resource: &str, index: u8) -> Result<String> {
        let e: EntryRequest = self.get(&format!("/entries/{resource}/{index}")).await?;
        Ok(e.line)
    }

    pub async fn read_filter(&self, register: Register) -> Result<u32> {
        let v: RegisterValue = self.get(&format!("/filter/{}", register_name(register))).await?;
        Ok(v.value)
    }

    /// configure-resource: writes a filter register.
    pub async fn configure(&self, register: Register, value: u32) -> Result<u32> {
        let req = RegisterValue { register, value };
        let v: RegisterValue =
            self.send(Method::PUT, &format!("/filter/{}", register_name(register)), Some(&req)).await?;
        Ok(v.value)
    }

    pub async fn set_stats(&self, link_util: u16, queue_len: u16) -> Result<StatsRequest> {
        self.send(Method::PUT, "/stats", Some(&StatsRequest { link_util, queue_len })).await
    }

    pub async fn state(&self) -> Result<StateDump> {
        self.get("/state").await
    }

    /// Runs a scenario on a fresh server-side pipeline. Programs must be inline.
    pub async fn run(&self, scenario: Scenario, options: RunOptions) -> Result<RunReport> {
        self.send(Method::POST, "/scenarios/run", Some(&ScenarioRequest { scenario, options })).await
    }
}

fn register_name(r: Register) -> &'static str {
    match r {
        Register::Cookie => "cookie",
        Register::Counter => "counter",
        Register::Bitmap => "bitmap",
    }
}
