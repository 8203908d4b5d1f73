// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use super::ast::*;
use super::{CompileError, ResourceQuota};
use crate::config::{IMM_MAX, PARSER_ACTIONS, STATEFUL_WORDS};
use crate::net::TCI_OFFSET;
use crate::phv::{ContainerKind, CONTAINERS_PER_KIND};
use crate::system;

/// Largest immediate usable in a predicate.
pub const PREDICATE_IMM_MAX: u64 = 127;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StaticViolation {
    /// Writes the VLAN tag, directly or through a field covering it.
    VidModification {
        pos: Pos,
    },
    /// Writes a platform statistic or packet property.
    StatWrite {
        name: String,
        pos: Pos,
    },
    Recirculation {
        pos: Pos,
    },
    FieldOverlap {
        a: String,
        b: String,
    },
    RegisterIndexOutOfBounds {
        register: String,
        index: u16,
        size: u16,
        pos: Pos,
    },
    ImmediateRange {
        value: u64,
        max: u64,
        pos: Pos,
    },
}

impl std::fmt::Display for StaticViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StaticViolation::VidModification { pos } => write!(f, "{pos}: write to the VLAN ID"),
            StaticViolation::StatWrite { name, pos } => write!(f, "{pos}: write to read-only `{name}`"),
            StaticViolation::Recirculation { pos } => write!(f, "{pos}: recirculation is not allowed"),
            StaticViolation::FieldOverlap { a, b } => write!(f, "fields `{a}` and `{b}` overlap"),
            StaticViolation::RegisterIndexOutOfBounds { register, index, size, pos } => {
                write!(f, "{pos}: index {index} outside `{register}[{size}]`")
            }
            StaticViolation::ImmediateRange { value, max, pos } => {
                write!(f, "{pos}: immediate {value} exceeds {max}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum ResourceViolation {
    /// Demand beyond the module's quota (or the hardware, whichever is lower).
    Exceeds {
        resource: String,
        used: u32,
        limit: u32,
    },
    /// Quota asks for more than one module can ever get.
    QuotaAboveHardware {
        resource: String,
        quota: u32,
        limit: u32,
    },
    ContainerExhausted {
        kind: ContainerKind,
        used: u32,
        available: u32,
    },
}

impl std::fmt::Display for ResourceViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ResourceViolation::Exceeds { resource, used, limit } => write!(f, "{resource}: {used} > {limit}"),
            ResourceViolation::QuotaAboveHardware { resource, quota, limit } => {
                write!(f, "quota {resource} = {quota} exceeds hardware limit {limit}")
            }
            ResourceViolation::ContainerExhausted { kind, used, available } => {
                write!(f, "{used} {}-byte containers needed, {available} available", kind.bytes())
            }
        }
    }
}

fn check_imm(v: &Value, max: u64, pos: Pos, out: &mut Vec<StaticViolation>) {
    if let Value::Imm(x) = v {
        if *x > max {
            out.push(StaticViolation::ImmediateRange { value: *x, max, pos });
        }
    }
}

/// Isolation policy: no VID or statistic writes, no recirculation, no
/// overlapping fields, no static out-of-bounds register index, and every
/// immediate encodable.
pub fn static_check(p: &ModuleProgram) -> Result<(), CompileError> {
    let mut out = Vec::new();
    for (i, a) in p.fields.iter().enumerate() {
        for b in &p.fields[i + 1..] {
            if a.offset < b.end() && b.offset < a.end() {
                out.push(StaticViolation::FieldOverlap { a: a.name.clone(), b: b.name.clone() });
            }
        }
    }
    for t in &p.tables {
        if let Some(pr) = &t.predicate {
            check_imm(&pr.lhs, PREDICATE_IMM_MAX, t.pos, &mut out);
            check_imm(&pr.rhs, PREDICATE_IMM_MAX, t.pos, &mut out);
        }
        for a in t.entries.iter().flat_map(|e| &e.actions) {
            let pos = a.pos;
            match &a.action {
                Action::Assign { dst, expr } => {
                    if dst == builtin::VID {
                        out.push(StaticViolation::VidModification { pos });
                    } else if builtin::READABLE.contains(&dst.as_str()) {
                        out.push(StaticViolation::StatWrite { name: dst.clone(), pos });
                    } else if let Some(f) = p.field(dst) {
                        if f.offset < TCI_OFFSET + 2 && TCI_OFFSET < f.end() {
                            out.push(StaticViolation::VidModification { pos });
                        }
                    }
                    match expr {
                        Expr::Value(v) => check_imm(v, IMM_MAX as u64, pos, &mut out),
                        Expr::Add(x, y) | Expr::Sub(x, y) => {
                            check_imm(x, IMM_MAX as u64, pos, &mut out);
                            check_imm(y, IMM_MAX as u64, pos, &mut out);
                        }
                        Expr::Load { .. } | Expr::LoadInc { .. } => {}
                    }
                }
                Action::Port(v) => check_imm(v, 31, pos, &mut out),
                Action::Ports(m) => check_imm(&Value::Imm(*m), IMM_MAX as u64, pos, &mut out),
                Action::Recirculate => out.push(StaticViolation::Recirculation { pos }),
                Action::Store { .. } | Action::Discard => {}
            }
            if let Some((r, idx)) = a.memory() {
                let size = p.register(r).unwrap().size;
                if idx >= size {
                    out.push(StaticViolation::RegisterIndexOutOfBounds { register: r.into(), index: idx, size, pos });
                }
            }
        }
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(CompileError::Static { violations: out })
    }
}

/// True for the field the system module keeps in the pinned container.
pub(crate) fn is_pinned(f: &FieldDecl) -> bool {
    f.offset == system::DST_IP_OFFSET && f.width == 32
}

/// Containers of `kind` a user module may claim.
pub(crate) fn available_containers(kind: ContainerKind) -> usize {
    CONTAINERS_PER_KIND - system::reserved_containers(kind)
}

/// Compares the program's demands with its quota and the hardware.
pub fn resource_check(p: &ModuleProgram, q: &ResourceQuota) -> Result<(), CompileError> {
    let mut out = Vec::new();
    let hw = |out: &mut Vec<ResourceViolation>, name: &str, quota: u32, limit: u32| {
        if quota > limit {
            out.push(ResourceViolation::QuotaAboveHardware { resource: name.into(), quota, limit });
        }
    };
    // One parse action is always spent on the system's destination address.
    hw(&mut out, "parser_actions", q.parser_actions as u32, PARSER_ACTIONS as u32);
    hw(&mut out, "cam_entries", q.cam_entries as u32, crate::config::TableGeometry::DEFAULT.cam_depth as u32);
    hw(&mut out, "stateful_words", q.stateful_words as u32, STATEFUL_WORDS as u32 - 1);
    for kind in ContainerKind::ALL {
        hw(&mut out, &format!("containers_{}b", kind.bytes()), q.containers(kind) as u32, CONTAINERS_PER_KIND as u32);
    }

    let used = p.used_fields();
    let pinned = used.iter().any(|f| is_pinned(f));
    let user_actions = used.len() as u32;
    let limit = (q.parser_actions as u32).min(PARSER_ACTIONS as u32 - u32::from(!pinned));
    if user_actions > limit {
        out.push(ResourceViolation::Exceeds { resource: "parser_actions".into(), used: user_actions, limit });
    }
    for kind in ContainerKind::ALL {
        let n = used.iter().filter(|f| f.kind() == kind && !is_pinned(f)).count() as u32;
        let limit = (q.containers(kind) as u32).min(available_containers(kind) as u32);
        if n > limit {
            out.push(ResourceViolation::Exceeds { resource: format!("containers_{}b", kind.bytes()), used: n, limit });
        }
    }
    for t in &p.tables {
        let n = t.entries.len() as u32;
        if n > q.cam_entries as u32 {
            out.push(ResourceViolation::Exceeds {
                resource: format!("cam_entries[{}]", t.name),
                used: n,
                limit: q.cam_entries as u32,
            });
        }
        let words: u32 = t.registers().iter().map(|r| p.register(r).unwrap().size as u32).sum();
        let limit = (q.stateful_words as u32).min(STATEFUL_WORDS as u32 - 1);
        if words > limit {
            out.push(ResourceViolation::Exceeds {
                resource: format!("stateful_words[{}]", t.name),
                used: words,
                limit,
            });
        }
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(CompileError::Resource { violations: out })
    }
}
