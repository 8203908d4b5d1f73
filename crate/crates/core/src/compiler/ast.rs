// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use crate::config::CmpOp;
use crate::phv::ContainerKind;

use super::ResourceQuota;

/// Line/column of a construct in the source (1-based).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

impl std::fmt::Display for Pos {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

/// Names that refer to platform metadata instead of packet bytes.
pub mod builtin {
    pub const PKT_LEN: &str = "pkt_len";
    pub const LINK_UTIL: &str = "link_util";
    pub const QUEUE_LEN: &str = "queue_len";
    pub const SRC_PORT: &str = "src_port";
    pub const VID: &str = "vid";

    /// Builtins a program may read as ALU operands.
    pub const READABLE: [&str; 4] = [PKT_LEN, LINK_UTIL, QUEUE_LEN, SRC_PORT];

    pub fn is_builtin(name: &str) -> bool {
        READABLE.contains(&name) || name == VID
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldDecl {
    pub name: String,
    pub width: u32,
    pub offset: usize,
    pub pos: Pos,
}

impl FieldDecl {
    pub fn kind(&self) -> ContainerKind {
        ContainerKind::from_bits(self.width).expect("validated width")
    }

    pub fn bytes(&self) -> usize {
        self.width as usize / 8
    }

    pub fn end(&self) -> usize {
        self.offset + self.bytes()
    }

    pub fn mask(&self) -> u64 {
        self.kind().mask()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegisterDecl {
    pub name: String,
    pub size: u16,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Value {
    Name(String),
    Imm(u64),
}

impl Value {
    pub fn name(&self) -> Option<&str> {
        match self {
            Value::Name(n) => Some(n),
            Value::Imm(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expr {
    Value(Value),
    Add(Value, Value),
    Sub(Value, Value),
    Load { register: String, index: u16 },
    LoadInc { register: String, index: u16 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Assign {
        dst: String,
        expr: Expr,
    },
    Store {
        register: String,
        index: u16,
        src: String,
    },
    /// Unicast to one port.
    Port(Value),
    /// Replace the destination port bitmap.
    Ports(u64),
    Discard,
    Recirculate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionDecl {
    pub action: Action,
    pub pos: Pos,
}

impl ActionDecl {
    /// Names read by this action.
    pub fn reads(&self) -> Vec<&str> {
        match &self.action {
            Action::Assign { expr, .. } => match expr {
                Expr::Value(v) => v.name().into_iter().collect(),
                Expr::Add(a, b) | Expr::Sub(a, b) => a.name().into_iter().chain(b.name()).collect(),
                Expr::Load { .. } | Expr::LoadInc { .. } => vec![],
            },
            Action::Store { src, .. } => vec![src.as_str()],
            Action::Port(v) => v.name().into_iter().collect(),
            Action::Ports(_) | Action::Discard | Action::Recirculate => vec![],
        }
    }

    /// Field assigned by this action.
    pub fn writes(&self) -> Option<&str> {
        match &self.action {
            Action::Assign { dst, .. } => Some(dst),
            _ => None,
        }
    }

    /// Field whose ALU executes this action. A store runs on its source
    /// field's ALU.
    pub fn alu_field(&self) -> Option<&str> {
        match &self.action {
            Action::Assign { dst, .. } => Some(dst),
            Action::Store { src, .. } => Some(src),
            _ => None,
        }
    }

    /// `(register, index)` touched, if any.
    pub fn memory(&self) -> Option<(&str, u16)> {
        match &self.action {
            Action::Assign { expr: Expr::Load { register, index } | Expr::LoadInc { register, index }, .. } => {
                Some((register, *index))
            }
            Action::Store { register, index, .. } => Some((register, *index)),
            _ => None,
        }
    }

    /// True for actions driving the metadata ALU.
    pub fn is_metadata(&self) -> bool {
        matches!(self.action, Action::Port(_) | Action::Ports(_) | Action::Discard)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntryDecl {
    pub key: Vec<u64>,
    pub actions: Vec<ActionDecl>,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Predicate {
    pub lhs: Value,
    pub op: CmpOp,
    pub rhs: Value,
}

impl Predicate {
    pub fn names(&self) -> Vec<&str> {
        self.lhs.name().into_iter().chain(self.rhs.name()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableDecl {
    pub name: String,
    pub keys: Vec<String>,
    pub predicate: Option<Predicate>,
    pub entries: Vec<EntryDecl>,
    pub pos: Pos,
}

impl TableDecl {
    /// Every name the table matches on or reads in an action.
    pub fn reads(&self) -> Vec<&str> {
        let mut r: Vec<&str> = self.keys.iter().map(String::as_str).collect();
        if let Some(p) = &self.predicate {
            r.extend(p.names());
        }
        for e in &self.entries {
            for a in &e.actions {
                r.extend(a.reads());
            }
        }
        r.sort_unstable();
        r.dedup();
        r
    }

    pub fn writes(&self) -> Vec<&str> {
        let mut w: Vec<&str> = self.entries.iter().flat_map(|e| e.actions.iter().filter_map(|a| a.writes())).collect();
        w.sort_unstable();
        w.dedup();
        w
    }

    pub fn registers(&self) -> Vec<&str> {
        let mut r: Vec<&str> =
            self.entries.iter().flat_map(|e| e.actions.iter().filter_map(|a| a.memory().map(|m| m.0))).collect();
        r.sort_unstable();
        r.dedup();
        r
    }
}

/// A parsed module program.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModuleProgram {
    pub name: String,
    pub fields: Vec<FieldDecl>,
    pub registers: Vec<RegisterDecl>,
    pub tables: Vec<TableDecl>,
    pub quota: Option<ResourceQuota>,
}

impl ModuleProgram {
    pub fn field(&self, name: &str) -> Option<&FieldDecl> {
        self.fields.iter().find(|f| f.name == name)
    }

    pub fn register(&self, name: &str) -> Option<&RegisterDecl> {
        self.registers.iter().find(|r| r.name == name)
    }

    pub fn quota(&self) -> ResourceQuota {
        self.quota.unwrap_or_default()
    }

    /// Fields referenced by any table, in declaration order.
    pub fn used_fields(&self) -> Vec<&FieldDecl> {
        let mut used: Vec<&str> = self.tables.iter().flat_map(|t| t.reads().into_iter().chain(t.writes())).collect();
        used.sort_unstable();
        used.dedup();
        self.fields.iter().filter(|f| used.binary_search(&f.name.as_str()).is_ok()).collect()
    }

    pub fn written_fields(&self) -> Vec<&FieldDecl> {
        let mut w: Vec<&str> = self.tables.iter().flat_map(|t| t.writes()).collect();
        w.sort_unstable();
        w.dedup();
        self.fields.iter().filter(|f| w.binary_search(&f.name.as_str()).is_ok()).collect()
    }
}
