// SPDX-License-Identifier: Apache-2.0

//! Software model of an isolation-enabled RMT pipeline.
//!
//! The crate is organised bottom-up:
//!
//! - [`phv`]: packet header vector, metadata block and raw packets.
//! - [`config`]: bit-exact codecs for every configuration table entry and
//!   for reconfiguration packets.
//! - [`engine`]: the data path (packet filter, parser, five match-action
//!   stages with paged stateful memory, deparser) and all mutable state.
//! - [`control`]: filter registers, reconfiguration sessions and the module
//!   manager that allocates slots, CAM rows and memory slices.
//! - [`compiler`]: module language front end, static/resource/placement
//!   checks, lowering to table entries, and a reference interpreter.
//! - [`system`]: the built-in system module occupying the first and last
//!   stages.
//! - [`harness`]: scenario files and the deterministic tick-driven runner.
//! - [`api`]: JSON bodies of the HTTP service.

pub mod api;
pub mod compiler;
pub mod config;
pub mod control;
pub mod engine;
pub mod harness;
pub mod net;
pub mod phv;
pub mod system;

pub use config::TableGeometry;
pub use engine::PipelineState;
pub use phv::{Phv, RawPacket};
