// SPDX-License-Identifier: Apache-2.0

//! The data path.
//!
//! One packet fully traverses filter, parser, the five stages and the
//! deparser before the next one starts. Each stage builds a key from the
//! PHV, looks it up (prefixed by the packet's VID) in the CAM, and on a hit
//! runs the VLIW row of the same index. All 25 ALUs of a VLIW row read the
//! PHV as it was when the stage started.

mod state;

use serde::{Deserialize, Serialize};

pub use state::{
    ApplyResult, FilterRegisters, ModuleCounters, PipelineState, RejectReason, RejectRecord, StageState, SystemStats,
};

use crate::config::reconfig::{is_control_vid, peek_cookie};
use crate::config::{operand, parse_reconfig_packet, AluOpcode, Key, KeyOperand, KeySlot, PREDICATE_BIT};
use crate::net;
use crate::phv::{ContainerRef, Phv, RawPacket, DEFAULT_MTU, HEADER_REGION, METADATA_INDEX, NUM_CONTAINERS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    NoVlan,
    BadCookie,
    /// Control-VID frame without reconfiguration framing.
    ControlFraming,
    UnknownModule,
    UnderUpdate,
    Oversize,
    Discarded,
    NoRoute,
}

impl DropReason {
    pub fn name(self) -> &'static str {
        match self {
            DropReason::NoVlan => "no_vlan",
            DropReason::BadCookie => "bad_cookie",
            DropReason::ControlFraming => "control_framing",
            DropReason::UnknownModule => "unknown_module",
            DropReason::UnderUpdate => "under_update",
            DropReason::Oversize => "oversize",
            DropReason::Discarded => "discarded",
            DropReason::NoRoute => "no_route",
        }
    }
}

/// Packet filter decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterVerdict {
    Data { slot: u8, vid: u16 },
    Reconfig,
    Drop(DropReason),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Forwarded { ports: Vec<u8> },
    Dropped { reason: DropReason },
    ConsumedReconfig { result: ApplyResult },
}

/// One ALU that did something on a hit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiredAction {
    pub alu: u8,
    pub op: String,
    #[serde(skip_serializing_if = "std::ops::Not::not", default)]
    pub fault: bool,
}

/// Trace record of one traversed unit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "unit", rename_all = "snake_case")]
pub enum UnitRecord {
    Filter { verdict: FilterVerdict },
    Parser { slot: u8, actions: u8 },
    Stage { stage: u8, key: String, hit: Option<u8>, actions: Vec<FiredAction> },
    Deparser { writes: u8, discard: bool, port_bitmap: u32 },
    Reconfig { target: String, index: u8, result: ApplyResult },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PacketOutcome {
    pub seq: u64,
    pub slot: Option<u8>,
    pub vid: Option<u16>,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub egress: Option<RawPacket>,
    pub trace: Vec<UnitRecord>,
}

impl PacketOutcome {
    pub fn is_forwarded(&self) -> bool {
        matches!(self.verdict, Verdict::Forwarded { .. })
    }

    pub fn drop_reason(&self) -> Option<DropReason> {
        match self.verdict {
            Verdict::Dropped { reason } => Some(reason),
            _ => None,
        }
    }

    /// Stage records `(stage, hit)` in traversal order.
    pub fn stage_hits(&self) -> impl Iterator<Item = (u8, Option<u8>)> + '_ {
        self.trace.iter().filter_map(|r| match r {
            UnitRecord::Stage { stage, hit, .. } => Some((*stage, *hit)),
            _ => None,
        })
    }
}

/// Stateful memory operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MemOp {
    Load,
    Store(u32),
    /// Load, then write back the loaded value plus one.
    LoadInc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemoryFault;

pub fn filter_packet(state: &PipelineState, pkt: &RawPacket) -> FilterVerdict {
    let Some(vid) = net::vlan_id(&pkt.bytes) else {
        return FilterVerdict::Drop(DropReason::NoVlan);
    };
    if is_control_vid(&pkt.bytes) {
        return match peek_cookie(&pkt.bytes) {
            Some(c) if c == state.filter.cookie => FilterVerdict::Reconfig,
            Some(_) => FilterVerdict::Drop(DropReason::BadCookie),
            None => FilterVerdict::Drop(DropReason::ControlFraming),
        };
    }
    if pkt.bytes.len() > DEFAULT_MTU + 4 {
        return FilterVerdict::Drop(DropReason::Oversize);
    }
    let Some(slot) = state.slot_of(vid) else {
        return FilterVerdict::Drop(DropReason::UnknownModule);
    };
    if state.filter.under_update(slot) {
        return FilterVerdict::Drop(DropReason::UnderUpdate);
    }
    FilterVerdict::Data { slot, vid }
}

/// Builds a fresh PHV for `pkt` from the slot's parser entry.
pub fn parse(state: &PipelineState, pkt: &RawPacket, slot: u8) -> Phv {
    let mut phv = Phv::zeroed();
    let header = pkt.header_region();
    for a in state.parser[slot as usize].valid_actions() {
        let v = net::read_be(&header, a.offset as usize, a.container.kind.bytes());
        phv.store_wrapping(a.container.flat(), v);
    }
    let m = &mut phv.metadata;
    m.vid = net::vlan_id(&pkt.bytes).unwrap_or(0);
    m.module_slot = slot;
    m.pkt_len = pkt.bytes.len().min(u16::MAX as usize) as u16;
    m.src_port = pkt.ingress_port;
    m.link_util = state.stats.link_util;
    m.queue_len = state.stats.queue_len;
    phv
}

fn key_operand(phv: &Phv, op: KeyOperand) -> u16 {
    match op {
        KeyOperand::Imm(v) => v as u16,
        KeyOperand::Container(c) => phv.value(c.flat()) as u16,
    }
}

/// Assembles the slot's masked 193-bit key for one stage.
pub fn extract_key(stage: &StageState, phv: &Phv, slot: u8) -> Key {
    let ke = &stage.key_extractor[slot as usize];
    let mut key = Key::ZERO;
    for (pos, ks) in KeySlot::ALL.into_iter().enumerate() {
        let c = ContainerRef::new(ks.kind(), ke.selectors[pos]);
        key.set_slot(ks, phv.value(c.flat()));
    }
    let pred = ke.cmp.eval(key_operand(phv, ke.operand_a), key_operand(phv, ke.operand_b));
    key.set_bit(PREDICATE_BIT, pred);
    key.and(&stage.key_mask[slot as usize])
}

/// Exact match of `vid ++ key` against the valid CAM rows.
pub fn match_cam(stage: &StageState, key: &Key, vid: u16) -> Option<u8> {
    let mut hits = stage
        .cam
        .iter()
        .enumerate()
        .filter(|(_, e)| matches!(e, Some(e) if e.vid == vid && e.key == *key))
        .map(|(i, _)| i as u8);
    let first = hits.next();
    assert!(hits.next().is_none(), "duplicate CAM match for vid {vid}");
    first
}

/// Translates and performs one stateful access for `slot`.
///
/// Out-of-range addresses touch nothing and bump the slot's fault counter.
pub fn access_memory(stage: &mut StageState, slot: u8, vaddr: u16, op: MemOp) -> Result<u32, MemoryFault> {
    let Some(phys) = stage.page_table[slot as usize].translate(vaddr) else {
        stage.faults[slot as usize] += 1;
        return Err(MemoryFault);
    };
    let word = &mut stage.memory[phys];
    Ok(match op {
        MemOp::Load => *word,
        MemOp::Store(v) => {
            *word = v;
            v
        }
        MemOp::LoadInc => {
            let old = *word;
            *word = old.wrapping_add(1);
            old
        }
    })
}

fn read_operand(phv: &Phv, sel: u8, imm: u16) -> u64 {
    match sel {
        s if (s as usize) < NUM_CONTAINERS => phv.value(s as usize),
        operand::PKT_LEN => phv.metadata.pkt_len as u64,
        operand::LINK_UTIL => phv.metadata.link_util as u64,
        operand::QUEUE_LEN => phv.metadata.queue_len as u64,
        operand::SRC_PORT => phv.metadata.src_port as u64,
        operand::IMMEDIATE => imm as u64,
        _ => 0,
    }
}

/// Runs VLIW row `hit` (or nothing on a miss) against `phv`.
///
/// Every operand is read from the input PHV. Memory operations run in ALU
/// order. Arithmetic wraps at the container width.
pub fn execute_vliw(stage: &mut StageState, phv: &Phv, slot: u8, hit: Option<u8>) -> (Phv, Vec<FiredAction>) {
    let Some(row) = hit else {
        return (phv.clone(), Vec::new());
    };
    let entry = stage.vliw[row as usize];
    let mut out = phv.clone();
    let mut fired = Vec::new();
    for (i, a) in entry.actions.iter().enumerate().take(NUM_CONTAINERS) {
        let opa = read_operand(phv, a.op_a, a.imm);
        let opb = read_operand(phv, a.op_b, a.imm);
        let imm = a.imm as u64;
        let mut fault = false;
        let result = match a.opcode {
            AluOpcode::Nop | AluOpcode::Port | AluOpcode::Discard => continue,
            AluOpcode::Add => opa.wrapping_add(opb),
            AluOpcode::Sub => opa.wrapping_sub(opb),
            AluOpcode::Addi => opa.wrapping_add(imm),
            AluOpcode::Subi => opa.wrapping_sub(imm),
            AluOpcode::Set => opa,
            AluOpcode::Load | AluOpcode::Store | AluOpcode::Loadd => {
                let op = match a.opcode {
                    AluOpcode::Load => MemOp::Load,
                    AluOpcode::Store => MemOp::Store(opa as u32),
                    _ => MemOp::LoadInc,
                };
                match access_memory(stage, slot, a.imm, op) {
                    Ok(_) if a.opcode == AluOpcode::Store => phv.value(i),
                    Ok(w) => w as u64,
                    Err(MemoryFault) => {
                        fault = true;
                        0
                    }
                }
            }
        };
        out.store_wrapping(i, result);
        fired.push(FiredAction { alu: i as u8, op: a.opcode.name().into(), fault });
    }
    let m = entry.actions[METADATA_INDEX];
    let md = &mut out.metadata;
    let fired_meta = match m.opcode {
        AluOpcode::Port => {
            md.dest_port_bitmap = 1 << (read_operand(phv, m.op_a, m.imm) & 31);
            true
        }
        AluOpcode::Set => {
            md.dest_port_bitmap = read_operand(phv, m.op_a, m.imm) as u32;
            true
        }
        AluOpcode::Discard => {
            md.discard = true;
            true
        }
        _ => false,
    };
    if fired_meta {
        fired.push(FiredAction { alu: METADATA_INDEX as u8, op: m.opcode.name().into(), fault: false });
    }
    (out, fired)
}

/// Writes the deparser-selected containers back into a copy of the
/// original packet. Only the first 128 bytes are ever modified.
pub fn deparse(state: &PipelineState, phv: &Phv, original: &RawPacket, slot: u8) -> (RawPacket, u8) {
    let mut bytes = original.bytes.clone();
    let limit = bytes.len().min(HEADER_REGION);
    let mut writes = 0u8;
    for a in state.deparser[slot as usize].valid_actions() {
        net::write_be(&mut bytes, a.offset as usize, a.container.kind.bytes(), phv.value(a.container.flat()), limit);
        writes += 1;
    }
    (RawPacket { bytes, arrival_seq: original.arrival_seq, ingress_port: original.ingress_port }, writes)
}

fn ports_of(bitmap: u32) -> Vec<u8> {
    (0..32u8).filter(|p| bitmap >> p & 1 == 1).collect()
}

impl PipelineState {
    /// Runs one packet through the whole pipeline.
    pub fn process_packet(&mut self, mut pkt: RawPacket) -> PacketOutcome {
        let seq = self.next_seq;
        self.next_seq += 1;
        pkt.arrival_seq = seq;

        let fv = filter_packet(self, &pkt);
        let mut trace = vec![UnitRecord::Filter { verdict: fv }];
        let (slot, vid) = match fv {
            FilterVerdict::Drop(reason) => {
                if reason == DropReason::UnderUpdate {
                    if let Some(s) = net::vlan_id(&pkt.bytes).and_then(|v| self.slot_of(v)) {
                        self.stats.modules[s as usize].dropped_under_update += 1;
                    }
                }
                let vid = net::vlan_id(&pkt.bytes);
                return PacketOutcome {
                    seq,
                    slot: None,
                    vid,
                    verdict: Verdict::Dropped { reason },
                    egress: None,
                    trace,
                };
            }
            FilterVerdict::Reconfig => {
                let (target, index, result) = match parse_reconfig_packet(&pkt) {
                    Ok(rp) => {
                        let r = crate::control::apply_reconfig(self, &rp);
                        (rp.write.resource.to_string(), rp.write.index, r)
                    }
                    Err(e) => {
                        self.filter.reconfig_counter = self.filter.reconfig_counter.wrapping_add(1);
                        let reason = RejectReason::Malformed(e.to_string());
                        self.log_reject("?".into(), reason.clone());
                        ("?".into(), 0, ApplyResult::Rejected(reason))
                    }
                };
                trace.push(UnitRecord::Reconfig { target, index, result: result.clone() });
                return PacketOutcome {
                    seq,
                    slot: None,
                    vid: Some(crate::config::RECONFIG_VID),
                    verdict: Verdict::ConsumedReconfig { result },
                    egress: None,
                    trace,
                };
            }
            FilterVerdict::Data { slot, vid } => (slot, vid),
        };

        let counters = &mut self.stats.modules[slot as usize];
        counters.packets += 1;
        counters.bytes += pkt.bytes.len() as u64;

        let mut phv = parse(self, &pkt, slot);
        let parsed = self.parser[slot as usize].valid_actions().count() as u8;
        trace.push(UnitRecord::Parser { slot, actions: parsed });

        for (i, stage) in self.stages.iter_mut().enumerate() {
            let key = extract_key(stage, &phv, slot);
            let hit = match_cam(stage, &key, vid);
            let (next, actions) = execute_vliw(stage, &phv, slot, hit);
            phv = next;
            trace.push(UnitRecord::Stage { stage: i as u8 + 1, key: key.to_hex(), hit, actions });
        }

        let (out, writes) = deparse(self, &phv, &pkt, slot);
        let md = phv.metadata;
        trace.push(UnitRecord::Deparser { writes, discard: md.discard, port_bitmap: md.dest_port_bitmap });
        let counters = &mut self.stats.modules[slot as usize];
        let (verdict, egress) = if md.discard {
            counters.dropped += 1;
            (Verdict::Dropped { reason: DropReason::Discarded }, None)
        } else if md.dest_port_bitmap == 0 {
            counters.dropped += 1;
            (Verdict::Dropped { reason: DropReason::NoRoute }, None)
        } else {
            counters.forwarded += 1;
            (Verdict::Forwarded { ports: ports_of(md.dest_port_bitmap) }, Some(out))
        };
        PacketOutcome { seq, slot: Some(slot), vid: Some(vid), verdict, egress, trace }
    }
}

#[cfg(test)]
mod tests;
