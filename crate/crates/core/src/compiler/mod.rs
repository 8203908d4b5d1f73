// SPDX-License-Identifier: Apache-2.0

//! Module compiler.
//!
//! Pipeline: [`parse_dsl`] → [`static_check`] → [`resource_check`] →
//! [`stage_assign`] → [`allocate_and_lower`] → [`emit_reconfig_packets`].
//! [`plan`] runs the checks; the module manager supplies a [`Placement`]
//! (slot, VID, CAM rows, memory bases) before lowering.
//!
//! User tables occupy stages 2–4, one table per stage. Stages 1 and 5
//! belong to the system module.

pub mod ast;
mod check;
mod interp;
mod lower;
mod parser;
mod place;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ast::{ModuleProgram, Pos};
pub use check::{resource_check, static_check, ResourceViolation, StaticViolation};
pub use interp::{interpret_reference, RefOutcome, RefState, SystemView};
pub use lower::{allocate_and_lower, emit_reconfig_packets, CamRow, CompiledModule, StageConfig};
pub use parser::parse_dsl;
pub use place::{stage_assign, PlacementError, StageMap};

use crate::config::{CAM_ENTRY_BITS, NUM_STAGES};
use crate::phv::ContainerKind;

pub const FIRST_USER_STAGE: u8 = 2;
pub const LAST_USER_STAGE: u8 = 4;
pub const USER_STAGES: usize = (LAST_USER_STAGE - FIRST_USER_STAGE + 1) as usize;
const _: () = assert!(USER_STAGES + 2 == NUM_STAGES && CAM_ENTRY_BITS == 205);

/// Per-module resource budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResourceQuota {
    /// Parse actions available to user fields.
    pub parser_actions: u8,
    /// CAM rows reserved per used stage.
    pub cam_entries: u8,
    /// Stateful words per used stage.
    pub stateful_words: u16,
    pub containers_2b: u8,
    pub containers_4b: u8,
    pub containers_6b: u8,
}

impl Default for ResourceQuota {
    fn default() -> Self {
        ResourceQuota {
            parser_actions: 10,
            cam_entries: 4,
            stateful_words: 64,
            containers_2b: 8,
            containers_4b: 8,
            containers_6b: 8,
        }
    }
}

impl ResourceQuota {
    pub fn containers(&self, kind: ContainerKind) -> u8 {
        match kind {
            ContainerKind::TwoByte => self.containers_2b,
            ContainerKind::FourByte => self.containers_4b,
            ContainerKind::SixByte => self.containers_6b,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum CompileError {
    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax { line: u32, col: u32, msg: String },
    #[error("static check failed: {}", join(.violations))]
    Static { violations: Vec<StaticViolation> },
    #[error("resource check failed: {}", join(.violations))]
    Resource { violations: Vec<ResourceViolation> },
    #[error("placement failed: {error}")]
    Placement { error: PlacementError },
}

fn join<T: std::fmt::Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

impl CompileError {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            CompileError::Syntax { .. } => 2,
            CompileError::Static { .. } => 3,
            CompileError::Resource { .. } => 4,
            CompileError::Placement { .. } => 5,
        }
    }
}

impl From<PlacementError> for CompileError {
    fn from(error: PlacementError) -> Self {
        CompileError::Placement { error }
    }
}

/// A program that passed every check, with its stage assignment and
/// per-stage demands.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Plan {
    pub program: ModuleProgram,
    pub quota: ResourceQuota,
    pub stages: StageMap,
}

impl Plan {
    /// Stateful words needed in each used stage.
    pub fn memory_words(&self) -> BTreeMap<u8, u16> {
        let mut out = BTreeMap::new();
        for (t, stage) in self.stages.assignments(&self.program) {
            let words = t.registers().iter().map(|r| self.program.register(r).unwrap().size).sum::<u16>();
            out.insert(stage, words);
        }
        out
    }

    /// Stages holding a table.
    pub fn used_stages(&self) -> Vec<u8> {
        self.stages.assigned.values().copied().collect()
    }
}

/// Where a module's resources live in the shared pipeline.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Placement {
    pub slot: u8,
    pub vid: u16,
    /// CAM rows reserved in each used stage.
    pub cam_rows: BTreeMap<u8, Vec<u8>>,
    /// First physical stateful word in each used stage.
    pub mem_base: BTreeMap<u8, u8>,
}

impl Placement {
    /// Rows `0..cam_entries` and memory base 0 in every used stage.
    pub fn standalone(slot: u8, vid: u16, plan: &Plan) -> Self {
        let rows: Vec<u8> = (0..plan.quota.cam_entries).collect();
        let stages = plan.used_stages();
        Placement {
            slot,
            vid,
            cam_rows: stages.iter().map(|&s| (s, rows.clone())).collect(),
            mem_base: stages.iter().map(|&s| (s, 0)).collect(),
        }
    }
}

/// Runs every check on a parsed program.
pub fn plan(program: ModuleProgram) -> Result<Plan, CompileError> {
    static_check(&program)?;
    let quota = program.quota();
    resource_check(&program, &quota)?;
    let stages = stage_assign(&program)?;
    Ok(Plan { program, quota, stages })
}

/// Source to verified entries for a given placement.
pub fn compile(source: &str, placement: &Placement) -> Result<CompiledModule, CompileError> {
    let plan = plan(parse_dsl(source)?)?;
    allocate_and_lower(&plan, placement)
}

/// Compiles at slot 1 with the module's own VID and rows from 0, as the
/// `compile` command does without a running pipeline.
pub fn compile_standalone(source: &str, vid: u16) -> Result<CompiledModule, CompileError> {
    let plan = plan(parse_dsl(source)?)?;
    allocate_and_lower(&plan, &Placement::standalone(1, vid, &plan))
}

#[cfg(test)]
mod tests;
