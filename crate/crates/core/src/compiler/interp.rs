// SPDX-License-Identifier: Apache-2.0

//! Reference semantics of a module program, independent of table entries.
//!
//! Fields are read from the packet's header region, the system's address
//! translation and routing run first, tables run in declaration order with
//! their actions applied one after another, and assigned fields are
//! written back. The result must equal what the pipeline produces for the
//! same module running alone.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ast::*;
use super::check::is_pinned;
use crate::engine::DropReason;
use crate::net;
use crate::phv::{RawPacket, HEADER_REGION};
use crate::system::{SystemConfig, DST_IP_OFFSET};

/// The system behaviour seen by one tenant.
#[derive(Debug, Clone, Copy)]
pub struct SystemView<'a> {
    pub config: &'a SystemConfig,
    pub vid: u16,
}

/// Mutable state of one module under the reference semantics.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RefState {
    pub registers: BTreeMap<String, Vec<u32>>,
    /// Packets seen by the system counter.
    pub counted: u64,
}

impl RefState {
    pub fn new(p: &ModuleProgram) -> Self {
        RefState {
            registers: p.registers.iter().map(|r| (r.name.clone(), vec![0; r.size as usize])).collect(),
            counted: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefOutcome {
    Forwarded { ports: Vec<u8>, bytes: Vec<u8> },
    Dropped { reason: DropReason },
}

struct Env<'a> {
    fields: BTreeMap<&'a str, u64>,
    pkt_len: u64,
    src_port: u64,
    link_util: u64,
    queue_len: u64,
}

impl Env<'_> {
    fn get(&self, v: &Value) -> u64 {
        match v {
            Value::Imm(x) => *x,
            Value::Name(n) => match n.as_str() {
                builtin::PKT_LEN => self.pkt_len,
                builtin::SRC_PORT => self.src_port,
                builtin::LINK_UTIL => self.link_util,
                builtin::QUEUE_LEN => self.queue_len,
                f => self.fields[f],
            },
        }
    }
}

fn width_mask(bits: u32) -> u64 {
    (1u64 << bits) - 1
}

/// Runs `pkt` through `prog` (and the tenant's system behaviour).
pub fn interpret_reference(prog: &ModuleProgram, pkt: &RawPacket, st: &mut RefState, sys: &SystemView) -> RefOutcome {
    let mut header = [0u8; HEADER_REGION];
    let n = pkt.bytes.len().min(HEADER_REGION);
    header[..n].copy_from_slice(&pkt.bytes[..n]);
    let read = |off: usize, bytes: usize| {
        let mut v = 0u64;
        for i in off..off + bytes {
            v = v << 8 | header.get(i).copied().unwrap_or(0) as u64;
        }
        v
    };

    let mut env = Env {
        fields: prog.fields.iter().map(|f| (f.name.as_str(), read(f.offset, f.bytes()))).collect(),
        pkt_len: pkt.bytes.len().min(u16::MAX as usize) as u64,
        src_port: pkt.ingress_port as u64,
        link_util: sys.config.link_util as u64,
        queue_len: sys.config.queue_len as u64,
    };
    let (mut dst, mut bitmap) = sys.config.resolve(sys.vid, read(DST_IP_OFFSET, 4) as u32);
    let pinned = prog.fields.iter().find(|f| is_pinned(f)).map(|f| f.name.as_str());
    if let Some(p) = pinned {
        env.fields.insert(p, dst as u64);
    }
    let mut discard = false;

    for t in &prog.tables {
        if let Some(pr) = &t.predicate {
            if !pr.op.eval(env.get(&pr.lhs) as u16, env.get(&pr.rhs) as u16) {
                continue;
            }
        }
        let Some(e) = t.entries.iter().find(|e| e.key.iter().zip(&t.keys).all(|(v, k)| env.fields[k.as_str()] == *v))
        else {
            continue;
        };
        for a in &e.actions {
            match &a.action {
                Action::Assign { dst: d, expr } => {
                    let v = match expr {
                        Expr::Value(v) => env.get(v),
                        Expr::Add(x, y) => env.get(x).wrapping_add(env.get(y)),
                        Expr::Sub(x, y) => env.get(x).wrapping_sub(env.get(y)),
                        Expr::Load { register, index } => st.registers[register][*index as usize] as u64,
                        Expr::LoadInc { register, index } => {
                            let w = &mut st.registers.get_mut(register).unwrap()[*index as usize];
                            let old = *w;
                            *w = old.wrapping_add(1);
                            old as u64
                        }
                    };
                    let f = prog.field(d).unwrap();
                    env.fields.insert(f.name.as_str(), v & width_mask(f.width));
                }
                Action::Store { register, index, src } => {
                    let v = env.fields[src.as_str()] as u32;
                    st.registers.get_mut(register).unwrap()[*index as usize] = v;
                }
                Action::Port(v) => bitmap = 1 << (env.get(v) % 32),
                Action::Ports(m) => bitmap = *m as u32,
                Action::Discard => discard = true,
                Action::Recirculate => {}
            }
        }
    }

    if sys.config.tenant(sys.vid).is_some_and(|t| t.count_packets) {
        st.counted += 1;
    }
    if discard {
        return RefOutcome::Dropped { reason: DropReason::Discarded };
    }
    if bitmap == 0 {
        return RefOutcome::Dropped { reason: DropReason::NoRoute };
    }

    if let Some(p) = pinned {
        dst = env.fields[p] as u32;
    }
    let mut bytes = pkt.bytes.clone();
    let limit = bytes.len().min(HEADER_REGION);
    net::write_be(&mut bytes, DST_IP_OFFSET, 4, dst as u64, limit);
    for f in prog.written_fields() {
        if Some(f.name.as_str()) != pinned {
            net::write_be(&mut bytes, f.offset, f.bytes(), env.fields[f.name.as_str()], limit);
        }
    }
    RefOutcome::Forwarded { ports: (0..32).filter(|p| bitmap >> p & 1 == 1).collect(), bytes }
}
