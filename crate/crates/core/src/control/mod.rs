// SPDX-License-Identifier: Apache-2.0

//! Configuration path: filter registers, the daisy-chain apply step and
//! reconfiguration sessions. [`manager`] builds on these to load, update
//! and unload whole modules.

pub mod manager;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigEntry, ReconfigPacket, ResourceType, MAX_MODULES, RECONFIG_VID};
use crate::engine::{ApplyResult, PacketOutcome, PipelineState, RejectReason};
use crate::phv::RawPacket;

pub use manager::{Controller, LoadedModule, ManagerError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Register {
    Cookie,
    Counter,
    Bitmap,
}

impl std::str::FromStr for Register {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "cookie" => Ok(Register::Cookie),
            "counter" => Ok(Register::Counter),
            "bitmap" => Ok(Register::Bitmap),
            _ => Err(format!("unknown register {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ControlError {
    #[error("register is read-only")]
    WriteToReadOnly,
    #[error("reconfiguration counter stopped at {reached}, expected {target}; bitmap left set")]
    Timeout { reached: u32, target: u32 },
    #[error("slot {0} out of range")]
    BadSlot(u8),
}

pub fn reg_read(state: &PipelineState, reg: Register) -> u32 {
    match reg {
        Register::Cookie => state.filter.cookie,
        Register::Counter => state.filter.reconfig_counter,
        Register::Bitmap => state.filter.update_bitmap,
    }
}

pub fn reg_write(state: &mut PipelineState, reg: Register, value: u32) -> Result<(), ControlError> {
    match reg {
        Register::Cookie => state.filter.cookie = value,
        Register::Bitmap => state.filter.update_bitmap = value,
        Register::Counter => return Err(ControlError::WriteToReadOnly),
    }
    Ok(())
}

/// True if `vid` is bound to a slot that is not currently being updated.
fn owned_by_live_slot(state: &PipelineState, vid: u16) -> bool {
    state.slot_of(vid).is_some_and(|s| !state.filter.under_update(s))
}

/// Applies one cookie-checked reconfiguration packet at its stage.
///
/// The counter advances exactly once whether or not the write is applied.
pub fn apply_reconfig(state: &mut PipelineState, pkt: &ReconfigPacket) -> ApplyResult {
    state.filter.reconfig_counter = state.filter.reconfig_counter.wrapping_add(1);
    let w = pkt.write;
    let result = check_and_write(state, pkt);
    if let ApplyResult::Rejected(reason) = &result {
        state.log_reject(format!("{} {}", w.resource, w.index), reason.clone());
    }
    result
}

fn check_and_write(state: &mut PipelineState, pkt: &ReconfigPacket) -> ApplyResult {
    use ApplyResult::*;
    let w = pkt.write;
    let idx = w.index as usize;
    if idx >= w.resource.rtype.depth(&state.geometry) {
        return Rejected(RejectReason::BadIndex);
    }
    let stage_idx = w.resource.stage_index();
    match w.entry {
        ConfigEntry::Parser(e) => state.parser[idx] = e,
        ConfigEntry::Deparser(e) => state.deparser[idx] = e,
        ConfigEntry::KeyExtractor(e) => state.stages[stage_idx.unwrap()].key_extractor[idx] = e,
        ConfigEntry::KeyMask(k) => state.stages[stage_idx.unwrap()].key_mask[idx] = k,
        ConfigEntry::PageTable(p) => state.stages[stage_idx.unwrap()].page_table[idx] = p,
        ConfigEntry::MemoryWord(v) => state.stages[stage_idx.unwrap()].memory[idx] = v,
        ConfigEntry::Cam(e) => {
            let s = stage_idx.unwrap();
            if let Some(old) = state.stages[s].cam[idx] {
                if old.vid != e.vid && owned_by_live_slot(state, old.vid) {
                    return Rejected(RejectReason::SlotMismatch);
                }
            }
            if e.is_clear() {
                state.stages[s].cam[idx] = None;
                return Applied;
            }
            if e.vid == RECONFIG_VID {
                return Rejected(RejectReason::ReservedVid);
            }
            if owned_by_live_slot(state, e.vid) {
                return Rejected(RejectReason::SlotMismatch);
            }
            let dup = state.stages[s].cam.iter().enumerate().any(|(j, r)| j != idx && *r == Some(e));
            if dup {
                return Rejected(RejectReason::DuplicateKey);
            }
            state.stages[s].cam[idx] = Some(e);
        }
        ConfigEntry::Vliw(v) => {
            let s = stage_idx.unwrap();
            if let Some(c) = state.stages[s].cam[idx] {
                if owned_by_live_slot(state, c.vid) {
                    return Rejected(RejectReason::SlotMismatch);
                }
            }
            state.stages[s].vliw[idx] = v;
        }
        ConfigEntry::Registry(r) => {
            if r.valid {
                if r.vid == RECONFIG_VID {
                    return Rejected(RejectReason::ReservedVid);
                }
                if state.slot_of(r.vid).is_some_and(|s| s as usize != idx) {
                    return Rejected(RejectReason::SlotMismatch);
                }
            }
            state.registry[idx] = r;
        }
    }
    debug_assert!(w.resource.rtype != ResourceType::Registry || idx < MAX_MODULES);
    Applied
}

/// An in-progress reconfiguration of one slot.
///
/// [`ReconfigSession::begin`] snapshots the counter and raises the slot's
/// bitmap bit; packets are then pushed through the data path (possibly
/// interleaved with other traffic) and [`ReconfigSession::finish`] polls the
/// counter and lowers the bit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReconfigSession {
    pub slot: u8,
    pub cookie: u32,
    pub counter_start: u32,
    pub packets: Vec<RawPacket>,
    pub sent: usize,
}

impl ReconfigSession {
    pub fn begin(state: &mut PipelineState, slot: u8, packets: Vec<RawPacket>) -> Result<Self, ControlError> {
        if slot as usize >= MAX_MODULES {
            return Err(ControlError::BadSlot(slot));
        }
        let cookie = reg_read(state, Register::Cookie);
        let counter_start = reg_read(state, Register::Counter);
        let bitmap = reg_read(state, Register::Bitmap);
        reg_write(state, Register::Bitmap, bitmap | 1 << slot)?;
        Ok(ReconfigSession { slot, cookie, counter_start, packets, sent: 0 })
    }

    pub fn remaining(&self) -> usize {
        self.packets.len() - self.sent
    }

    /// Injects up to `n` more packets into the daisy chain.
    pub fn step(&mut self, state: &mut PipelineState, n: usize) -> Vec<PacketOutcome> {
        let end = (self.sent + n).min(self.packets.len());
        let out = self.packets[self.sent..end].iter().map(|p| state.process_packet(p.clone())).collect();
        self.sent = end;
        out
    }

    pub fn target(&self) -> u32 {
        self.counter_start.wrapping_add(self.packets.len() as u32)
    }

    /// True once every packet has been counted by the filter.
    pub fn poll(&self, state: &PipelineState) -> bool {
        let done = reg_read(state, Register::Counter).wrapping_sub(self.counter_start);
        done >= self.packets.len() as u32
    }

    pub fn finish(self, state: &mut PipelineState) -> Result<(), ControlError> {
        if !self.poll(state) {
            return Err(ControlError::Timeout { reached: state.filter.reconfig_counter, target: self.target() });
        }
        let bitmap = reg_read(state, Register::Bitmap);
        reg_write(state, Register::Bitmap, bitmap & !(1 << self.slot))
    }
}

/// Runs a whole session without interleaved traffic.
pub fn reconfigure_module(
    state: &mut PipelineState,
    slot: u8,
    packets: Vec<RawPacket>,
) -> Result<Vec<PacketOutcome>, ControlError> {
    let mut s = ReconfigSession::begin(state, slot, packets)?;
    let n = s.remaining();
    let out = s.step(state, n);
    s.finish(state)?;
    Ok(out)
}
