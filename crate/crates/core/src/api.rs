// SPDX-License-Identifier: Apache-2.0

//! JSON bodies exchanged with the pipeline service.

use serde::{Deserialize, Serialize};

use crate::compiler::CompileError;
use crate::control::Register;
use crate::harness::{RunOptions, Scenario};

fn one() -> u16 {
    1
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompileRequest {
    pub source: String,
    /// VID used for the standalone placement.
    #[serde(default = "one")]
    pub vid: u16,
    /// Cookie for the emitted packets; the service's own if absent.
    #[serde(default)]
    pub cookie: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompileResponse {
    pub name: String,
    /// Compiled-module dump.
    pub dump: String,
    /// Reconfiguration frames as hex, in install order.
    pub packets: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadRequest {
    pub source: String,
    pub vid: u16,
    #[serde(default)]
    pub slot: Option<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpdateRequest {
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PacketRequest {
    pub hex: String,
    #[serde(default)]
    pub ingress_port: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchRequest {
    pub packets: Vec<PacketRequest>,
}

/// One entry in dump-line form: `<resource> <index> <hex>`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntryRequest {
    pub line: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegisterValue {
    pub register: Register,
    pub value: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsRequest {
    pub link_util: u16,
    pub queue_len: u16,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateDump {
    pub reconfig_counter: u32,
    pub update_bitmap: u32,
    /// Every non-default entry in dump-line form.
    pub lines: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioRequest {
    /// Programs must be inline; `source` paths are not read by the service.
    pub scenario: Scenario,
    #[serde(default)]
    pub options: RunOptions,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub modules: usize,
}

/// Error body for every non-2xx response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub kind: String,
    pub error: String,
    /// Compiler exit code (2-5) for compile errors.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exit_code: Option<i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compile: Option<CompileError>,
}
