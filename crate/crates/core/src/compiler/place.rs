// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ast::*;
use super::{CompileError, FIRST_USER_STAGE, USER_STAGES};

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlacementError {
    #[error("dependency chain {} needs more than {max} stages", .chain.join(" -> "))]
    TooManyDependencyLevels { chain: Vec<String>, max: usize },
    #[error("{count} tables, at most {max} fit")]
    TooManyTables { count: usize, max: usize },
    #[error("register `{register}` used by tables {}", .tables.join(", "))]
    RegisterShared { register: String, tables: Vec<String> },
    #[error("table `{table}` entry {entry}: {detail}")]
    ActionConflict { table: String, entry: usize, detail: String },
    #[error("table `{table}` leaves no free key bits to mark reserved rows")]
    NoPlaceholderSpace { table: String },
}

/// Table-to-stage assignment.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StageMap {
    /// Longest dependency path ending at each table (0 = independent).
    pub levels: BTreeMap<String, u8>,
    /// Stage holding each table.
    pub assigned: BTreeMap<String, u8>,
}

impl StageMap {
    /// Tables in declaration order with their stages.
    pub fn assignments<'a>(&'a self, p: &'a ModuleProgram) -> impl Iterator<Item = (&'a TableDecl, u8)> + 'a {
        p.tables.iter().map(move |t| (t, self.assigned[&t.name]))
    }

    /// Earliest stage a table could occupy given its dependencies.
    pub fn earliest(&self, table: &str) -> u8 {
        FIRST_USER_STAGE + self.levels[table]
    }
}

fn conflict(t: &TableDecl, entry: usize, detail: String) -> CompileError {
    PlacementError::ActionConflict { table: t.name.clone(), entry, detail }.into()
}

/// An entry's actions all run in one VLIW row, so they must not depend on
/// each other.
fn check_packable(t: &TableDecl) -> Result<(), CompileError> {
    for (ei, e) in t.entries.iter().enumerate() {
        let mut written = BTreeSet::new();
        let mut mem = BTreeSet::new();
        let mut meta = 0;
        for a in &e.actions {
            if let Some(w) = a.alu_field() {
                if !written.insert(w) {
                    return Err(conflict(t, ei, format!("`{w}` used by two actions")));
                }
            }
            if let Some(m) = a.memory() {
                if !mem.insert(m) {
                    return Err(conflict(t, ei, format!("`{}[{}]` accessed twice", m.0, m.1)));
                }
            }
            if a.is_metadata() {
                meta += 1;
                if meta > 1 {
                    return Err(conflict(t, ei, "more than one port/discard action".into()));
                }
            }
        }
        for (i, a) in e.actions.iter().enumerate() {
            for (j, b) in e.actions.iter().enumerate() {
                if i != j {
                    if let Some(w) = a.writes() {
                        if b.reads().contains(&w) {
                            return Err(conflict(t, ei, format!("`{w}` is written and read by different actions")));
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

/// Orders tables into stages 2–4, one per stage, in declaration order,
/// after checking that dependencies fit and register arrays are private
/// to one table.
pub fn stage_assign(p: &ModuleProgram) -> Result<StageMap, CompileError> {
    let mut users: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for t in &p.tables {
        for r in t.registers() {
            users.entry(r).or_default().push(t.name.clone());
        }
    }
    if let Some((r, ts)) = users.into_iter().find(|(_, ts)| ts.len() > 1) {
        return Err(PlacementError::RegisterShared { register: r.into(), tables: ts }.into());
    }
    for t in &p.tables {
        check_packable(t)?;
    }

    let mut levels: BTreeMap<String, u8> = BTreeMap::new();
    let mut parent: BTreeMap<&str, &str> = BTreeMap::new();
    for (i, t) in p.tables.iter().enumerate() {
        let reads = t.reads();
        let mut level = 0u8;
        for prev in &p.tables[..i] {
            if prev.writes().iter().any(|w| reads.contains(w)) {
                let l = levels[&prev.name] + 1;
                if l > level {
                    level = l;
                    parent.insert(&t.name, &prev.name);
                }
            }
        }
        if level as usize >= USER_STAGES {
            let mut chain = vec![t.name.clone()];
            let mut cur = t.name.as_str();
            while let Some(p) = parent.get(cur) {
                chain.push(p.to_string());
                cur = p;
            }
            chain.reverse();
            return Err(PlacementError::TooManyDependencyLevels { chain, max: USER_STAGES }.into());
        }
        levels.insert(t.name.clone(), level);
    }
    if p.tables.len() > USER_STAGES {
        return Err(PlacementError::TooManyTables { count: p.tables.len(), max: USER_STAGES }.into());
    }
    let assigned = p.tables.iter().enumerate().map(|(i, t)| (t.name.clone(), FIRST_USER_STAGE + i as u8)).collect();
    let map = StageMap { levels, assigned };
    for t in &p.tables {
        debug_assert!(map.assigned[&t.name] >= map.earliest(&t.name));
    }
    Ok(map)
}
