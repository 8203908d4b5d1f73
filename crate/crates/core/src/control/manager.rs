// SPDX-License-Identifier: Apache-2.0

//! Loads, updates and unloads modules on a live pipeline.
//!
//! The controller owns the pipeline state, the system configuration and
//! the table of loaded modules, and allocates slots, CAM rows and memory
//! windows. Every change is a list of entry writes delivered as
//! reconfiguration packets inside a [`ReconfigSession`], so the slot's
//! traffic is dropped while the change is in flight and other slots are
//! unaffected.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{ControlError, ReconfigSession};
use crate::compiler::{self, CompileError, CompiledModule, Placement, Plan};
use crate::config::{
    CamEntry, ConfigEntry, ConfigWrite, Key, KeyExtractorEntry, PageTableEntry, ParserEntry, ReconfigPacket,
    RegistryEntry, Resource, ResourceType, VliwEntry, MAX_MODULES, RECONFIG_VID,
};
use crate::engine::{ModuleCounters, PacketOutcome, PipelineState, RejectRecord};
use crate::phv::RawPacket;
use crate::system::{
    self, SystemConfig, SystemError, SystemPlacement, ENTRY_STAGE, EXIT_STAGE, SYSTEM_SLOT, SYSTEM_VID,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ManagerError {
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error("all {MAX_MODULES} module slots are in use")]
    RegistryFull,
    #[error("slot {0} is already in use")]
    SlotInUse(u8),
    #[error("no module in slot {0}")]
    UnknownSlot(u8),
    #[error("VID {0} is already bound")]
    VidInUse(u16),
    #[error("VID {0} is reserved")]
    ReservedVid(u16),
    #[error("stage {stage}: {needed} CAM rows needed, {free} free")]
    CamExhausted { stage: u8, needed: usize, free: usize },
    #[error("stage {stage}: no free window of {needed} stateful words")]
    MemoryExhausted { stage: u8, needed: u16 },
    #[error("slot {0} already has a change in flight")]
    Busy(u8),
    #[error("{} writes rejected, first: {:?}", .0.len(), .0.first())]
    Rejected(Vec<RejectRecord>),
    #[error("{0} entries differ from the compiled module after install")]
    Mismatch(usize),
    #[error("no module register `{0}`")]
    UnknownRegister(String),
}

/// A module resident in the pipeline.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadedModule {
    pub slot: u8,
    pub vid: u16,
    pub name: String,
    pub source: String,
    /// User and system entries together.
    pub compiled: CompiledModule,
}

impl LoadedModule {
    pub fn summary(&self) -> ModuleSummary {
        let cam_rows = self.compiled.stages.iter().map(|(s, c)| (*s, c.rows.iter().map(|r| r.row).collect())).collect();
        ModuleSummary {
            slot: self.slot,
            vid: self.vid,
            name: self.name.clone(),
            tables: self.compiled.tables.clone(),
            cam_rows,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModuleSummary {
    pub slot: u8,
    pub vid: u16,
    pub name: String,
    pub tables: BTreeMap<String, u8>,
    pub cam_rows: BTreeMap<u8, Vec<u8>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChangeKind {
    Load,
    Update,
    Unload,
}

/// A prepared change: the writes and their packets for one slot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PendingChange {
    pub kind: ChangeKind,
    pub slot: u8,
    pub vid: u16,
    pub writes: Vec<ConfigWrite>,
    pub packets: Vec<RawPacket>,
    /// The module after the change (`None` after an unload).
    pub module: Option<LoadedModule>,
}

/// A change whose session has begun.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActiveChange {
    pub change: PendingChange,
    pub session: ReconfigSession,
    reject_mark: usize,
}

impl ActiveChange {
    pub fn slot(&self) -> u8 {
        self.change.slot
    }

    pub fn remaining(&self) -> usize {
        self.session.remaining()
    }

    pub fn step(&mut self, state: &mut PipelineState, n: usize) -> Vec<PacketOutcome> {
        self.session.step(state, n)
    }
}

/// Per-slot counters and system packet count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModuleReport {
    pub slot: u8,
    pub vid: Option<u16>,
    pub counters: ModuleCounters,
    /// Value of the system packet counter, when enabled.
    pub system_count: Option<u32>,
    /// Memory faults per stage (1-based index 0 = stage 1).
    pub faults: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Controller {
    pub state: PipelineState,
    pub system: SystemConfig,
    modules: BTreeMap<u8, LoadedModule>,
    /// Modules reserved by changes in flight.
    pending: BTreeMap<u8, Option<LoadedModule>>,
}

fn clear_writes(cm: &CompiledModule) -> Vec<ConfigWrite> {
    let mut out = Vec::new();
    for (&s, cfg) in &cm.stages {
        for r in &cfg.rows {
            out.push(ConfigWrite::new(
                Resource::stage(ResourceType::Cam, s),
                r.row,
                ConfigEntry::Cam(CamEntry::default()),
            ));
            out.push(ConfigWrite::new(
                Resource::stage(ResourceType::Vliw, s),
                r.row,
                ConfigEntry::Vliw(VliwEntry::default()),
            ));
        }
    }
    out
}

fn teardown_writes(cm: &CompiledModule) -> Vec<ConfigWrite> {
    let slot = cm.slot;
    let mut out = vec![ConfigWrite::new(Resource::REGISTRY, slot, ConfigEntry::Registry(RegistryEntry::default()))];
    out.push(ConfigWrite::new(Resource::PARSER, slot, ConfigEntry::Parser(ParserEntry::default())));
    out.extend(clear_writes(cm));
    for (&s, cfg) in &cm.stages {
        let r = |t| Resource::stage(t, s);
        out.push(ConfigWrite::new(
            r(ResourceType::KeyExtractor),
            slot,
            ConfigEntry::KeyExtractor(KeyExtractorEntry::default()),
        ));
        out.push(ConfigWrite::new(r(ResourceType::KeyMask), slot, ConfigEntry::KeyMask(Key::ZERO)));
        out.push(ConfigWrite::new(r(ResourceType::PageTable), slot, ConfigEntry::PageTable(PageTableEntry::default())));
        for &(addr, _) in &cfg.memory {
            out.push(ConfigWrite::new(r(ResourceType::MemoryWord), addr, ConfigEntry::MemoryWord(0)));
        }
    }
    out.push(ConfigWrite::new(Resource::DEPARSER, slot, ConfigEntry::Deparser(ParserEntry::default())));
    out
}

impl Controller {
    /// A pipeline with only the system module bound.
    pub fn new(cookie: u32, system: SystemConfig) -> Result<Self, ManagerError> {
        system.validate()?;
        let mut state = PipelineState::new(cookie);
        state.stats.link_util = system.link_util;
        state.stats.queue_len = system.queue_len;
        let bind =
            ConfigWrite::new(Resource::REGISTRY, SYSTEM_SLOT, ConfigEntry::Registry(RegistryEntry::bind(SYSTEM_VID)));
        super::reconfigure_module(&mut state, SYSTEM_SLOT, vec![ReconfigPacket::new(cookie, bind).to_raw()])?;
        Ok(Controller { state, system, modules: BTreeMap::new(), pending: BTreeMap::new() })
    }

    pub fn cookie(&self) -> u32 {
        self.state.filter.cookie
    }

    pub fn modules(&self) -> impl Iterator<Item = &LoadedModule> {
        self.modules.values()
    }

    pub fn module(&self, slot: u8) -> Option<&LoadedModule> {
        self.modules.get(&slot)
    }

    pub fn slot_of_vid(&self, vid: u16) -> Option<u8> {
        self.modules.values().find(|m| m.vid == vid).map(|m| m.slot)
    }

    /// Sets the link utilisation and queue length the parser exposes.
    pub fn set_stats(&mut self, link_util: u16, queue_len: u16) {
        self.system.link_util = link_util;
        self.system.queue_len = queue_len;
        self.state.stats.link_util = link_util;
        self.state.stats.queue_len = queue_len;
    }

    /// Compiled modules holding resources, excluding `slot`.
    fn holders(&self, except: u8) -> impl Iterator<Item = &CompiledModule> {
        let pending = self.pending.values().flatten();
        self.modules.values().chain(pending).filter(move |m| m.slot != except).map(|m| &m.compiled)
    }

    fn free_rows(&self, stage: u8, except: u8) -> Vec<u8> {
        let used: BTreeSet<u8> = self
            .holders(except)
            .filter_map(|m| m.stages.get(&stage))
            .flat_map(|c| c.rows.iter().map(|r| r.row))
            .collect();
        (0..self.state.geometry.cam_depth as u8).filter(|r| !used.contains(r)).collect()
    }

    fn take_rows(
        &self,
        stage: u8,
        n: usize,
        except: u8,
        taken: &mut BTreeMap<u8, Vec<u8>>,
    ) -> Result<Vec<u8>, ManagerError> {
        let already = taken.get(&stage).cloned().unwrap_or_default();
        let free: Vec<u8> = self.free_rows(stage, except).into_iter().filter(|r| !already.contains(r)).collect();
        if free.len() < n {
            return Err(ManagerError::CamExhausted { stage, needed: n, free: free.len() });
        }
        let rows = free[..n].to_vec();
        taken.entry(stage).or_default().extend(&rows);
        Ok(rows)
    }

    /// First-fit window of `n` words in `stage`.
    fn take_window(
        &self,
        stage: u8,
        n: u16,
        except: u8,
        taken: &mut BTreeMap<u8, Vec<(u16, u16)>>,
    ) -> Result<u8, ManagerError> {
        if n == 0 {
            return Ok(0);
        }
        let mut used: Vec<(u16, u16)> = self
            .holders(except)
            .filter_map(|m| m.stages.get(&stage))
            .map(|c| (c.page.base as u16, c.page.range as u16))
            .filter(|w| w.1 > 0)
            .collect();
        used.extend(taken.get(&stage).into_iter().flatten());
        used.sort_unstable();
        let mut base = 0u16;
        for (b, r) in used {
            if base + n <= b {
                break;
            }
            base = base.max(b + r);
        }
        if base + n > self.state.geometry.stateful_words as u16 || base > u8::MAX as u16 {
            return Err(ManagerError::MemoryExhausted { stage, needed: n });
        }
        taken.entry(stage).or_default().push((base, n));
        Ok(base as u8)
    }

    fn build(&self, source: &str, slot: u8, vid: u16) -> Result<LoadedModule, ManagerError> {
        let plan: Plan = compiler::plan(compiler::parse_dsl(source)?)?;
        let mut rows = BTreeMap::new();
        let mut windows = BTreeMap::new();

        let demand = self.system.demand(vid);
        let sys = SystemPlacement {
            entry_rows: self.take_rows(ENTRY_STAGE, demand.entry_rows, slot, &mut rows)?,
            entry_base: self.take_window(ENTRY_STAGE, demand.entry_words, slot, &mut windows)?,
            exit_row: self.take_rows(EXIT_STAGE, demand.exit_rows, slot, &mut rows)?.first().copied(),
            exit_base: self.take_window(EXIT_STAGE, demand.exit_words, slot, &mut windows)?,
        };
        let sys_cm = system::build_system_module(&self.system, slot, vid, &sys)?;

        let mut placement = Placement { slot, vid, ..Default::default() };
        let words = plan.memory_words();
        for s in plan.used_stages() {
            placement.cam_rows.insert(s, self.take_rows(s, plan.quota.cam_entries as usize, slot, &mut rows)?);
            let n = words.get(&s).copied().unwrap_or(0);
            placement.mem_base.insert(s, self.take_window(s, n, slot, &mut windows)?);
        }
        let user = compiler::allocate_and_lower(&plan, &placement)?;
        let compiled = user.merge(sys_cm);
        Ok(LoadedModule { slot, vid, name: plan.program.name.clone(), source: source.into(), compiled })
    }

    fn check_vid(&self, vid: u16, except: Option<u8>) -> Result<(), ManagerError> {
        if vid == SYSTEM_VID || vid >= RECONFIG_VID {
            return Err(ManagerError::ReservedVid(vid));
        }
        let taken = self
            .modules
            .values()
            .chain(self.pending.values().flatten())
            .any(|m| m.vid == vid && Some(m.slot) != except);
        if taken {
            return Err(ManagerError::VidInUse(vid));
        }
        Ok(())
    }

    fn packets(&self, writes: &[ConfigWrite]) -> Vec<RawPacket> {
        writes.iter().map(|w| ReconfigPacket::new(self.cookie(), *w).to_raw()).collect()
    }

    fn free_slot(&self) -> Option<u8> {
        (1..MAX_MODULES as u8).find(|s| !self.modules.contains_key(s) && !self.pending.contains_key(s))
    }

    pub fn prepare_load(&self, source: &str, vid: u16, slot: Option<u8>) -> Result<PendingChange, ManagerError> {
        self.check_vid(vid, None)?;
        let slot = match slot {
            Some(s) if s == SYSTEM_SLOT || s as usize >= MAX_MODULES => return Err(ControlError::BadSlot(s).into()),
            Some(s) if self.modules.contains_key(&s) || self.pending.contains_key(&s) => {
                return Err(ManagerError::SlotInUse(s))
            }
            Some(s) => s,
            None => self.free_slot().ok_or(ManagerError::RegistryFull)?,
        };
        let module = self.build(source, slot, vid)?;
        let writes = module.compiled.writes();
        Ok(PendingChange {
            kind: ChangeKind::Load,
            slot,
            vid,
            packets: self.packets(&writes),
            writes,
            module: Some(module),
        })
    }

    /// New program for a loaded slot. Old rows are cleared first so keys
    /// that move between rows never collide.
    pub fn prepare_update(&self, slot: u8, source: &str) -> Result<PendingChange, ManagerError> {
        let old = self.modules.get(&slot).ok_or(ManagerError::UnknownSlot(slot))?;
        if self.pending.contains_key(&slot) {
            return Err(ManagerError::Busy(slot));
        }
        let module = self.build(source, slot, old.vid)?;
        let mut writes = clear_writes(&old.compiled);
        // Windows the new version no longer uses are zeroed for the next owner.
        for (&s, cfg) in &old.compiled.stages {
            let keep = module.compiled.stages.get(&s).map(|c| c.memory.iter().map(|m| m.0).collect::<BTreeSet<_>>());
            for &(addr, _) in &cfg.memory {
                if !keep.as_ref().is_some_and(|k| k.contains(&addr)) {
                    writes.push(ConfigWrite::new(
                        Resource::stage(ResourceType::MemoryWord, s),
                        addr,
                        ConfigEntry::MemoryWord(0),
                    ));
                }
            }
        }
        writes.extend(module.compiled.writes());
        Ok(PendingChange {
            kind: ChangeKind::Update,
            slot,
            vid: old.vid,
            packets: self.packets(&writes),
            writes,
            module: Some(module),
        })
    }

    /// The binding goes first so no packet reaches half-removed tables.
    pub fn prepare_unload(&self, slot: u8) -> Result<PendingChange, ManagerError> {
        let old = self.modules.get(&slot).ok_or(ManagerError::UnknownSlot(slot))?;
        if self.pending.contains_key(&slot) {
            return Err(ManagerError::Busy(slot));
        }
        let writes = teardown_writes(&old.compiled);
        Ok(PendingChange {
            kind: ChangeKind::Unload,
            slot,
            vid: old.vid,
            packets: self.packets(&writes),
            writes,
            module: None,
        })
    }

    /// Raises the slot's update bit and reserves the change's resources.
    pub fn begin(&mut self, change: PendingChange) -> Result<ActiveChange, ManagerError> {
        if self.pending.contains_key(&change.slot) {
            return Err(ManagerError::Busy(change.slot));
        }
        let session = ReconfigSession::begin(&mut self.state, change.slot, change.packets.clone())?;
        self.pending.insert(change.slot, change.module.clone());
        Ok(ActiveChange { change, session, reject_mark: self.state.reject_log.len() })
    }

    /// Lowers the update bit once every packet is counted, then checks that
    /// no write was rejected and the pipeline holds exactly the new entries.
    pub fn complete(&mut self, active: ActiveChange) -> Result<(), ManagerError> {
        let ActiveChange { change, session, reject_mark } = active;
        session.finish(&mut self.state)?;
        self.pending.remove(&change.slot);
        let rejected: Vec<RejectRecord> = self.state.reject_log.iter().skip(reject_mark).cloned().collect();
        match change.module {
            Some(m) => {
                self.modules.insert(change.slot, m);
            }
            None => {
                self.modules.remove(&change.slot);
            }
        }
        if !rejected.is_empty() {
            return Err(ManagerError::Rejected(rejected));
        }
        let expected = match &self.modules.get(&change.slot) {
            Some(m) => m.compiled.writes(),
            None => change.writes.clone(),
        };
        let diff = self.state.diff(&expected);
        if !diff.is_empty() {
            return Err(ManagerError::Mismatch(diff.len()));
        }
        Ok(())
    }

    /// Abandons a change whose session cannot finish; the slot stays
    /// blocked until a later change completes.
    pub fn abort(&mut self, active: ActiveChange) {
        self.pending.remove(&active.change.slot);
    }

    /// Runs a prepared change to completion with no other traffic.
    pub fn apply(&mut self, change: PendingChange) -> Result<Vec<PacketOutcome>, ManagerError> {
        let mut active = self.begin(change)?;
        let n = active.remaining();
        let out = active.step(&mut self.state, n);
        self.complete(active)?;
        Ok(out)
    }

    pub fn load_module(&mut self, source: &str, vid: u16) -> Result<u8, ManagerError> {
        let change = self.prepare_load(source, vid, None)?;
        let slot = change.slot;
        self.apply(change)?;
        Ok(slot)
    }

    pub fn load_module_at(&mut self, source: &str, vid: u16, slot: u8) -> Result<u8, ManagerError> {
        let change = self.prepare_load(source, vid, Some(slot))?;
        self.apply(change)?;
        Ok(slot)
    }

    pub fn update_module(&mut self, slot: u8, source: &str) -> Result<(), ManagerError> {
        let change = self.prepare_update(slot, source)?;
        self.apply(change).map(|_| ())
    }

    pub fn unload_module(&mut self, slot: u8) -> Result<(), ManagerError> {
        let change = self.prepare_unload(slot)?;
        self.apply(change).map(|_| ())
    }

    pub fn process(&mut self, pkt: RawPacket) -> PacketOutcome {
        self.state.process_packet(pkt)
    }

    /// Sends one raw entry write through the data path with this
    /// controller's cookie. The filter's ownership checks still apply.
    pub fn send_entry(&mut self, write: ConfigWrite) -> PacketOutcome {
        let pkt = ReconfigPacket::new(self.cookie(), write).to_raw();
        self.state.process_packet(pkt)
    }

    /// Current contents of a module's register array.
    pub fn read_register(&self, slot: u8, name: &str) -> Result<Vec<u32>, ManagerError> {
        let m = self.modules.get(&slot).ok_or(ManagerError::UnknownSlot(slot))?;
        let loc = m.compiled.registers.get(name).ok_or_else(|| ManagerError::UnknownRegister(name.into()))?;
        let stage = &self.state.stages[loc.stage as usize - 1];
        let page = stage.page_table[slot as usize];
        Ok((0..loc.size).map(|i| page.translate(loc.vaddr + i).map_or(0, |p| stage.memory[p])).collect())
    }

    pub fn report(&self, slot: u8) -> ModuleReport {
        let system_count = self.modules.get(&slot).and_then(|m| {
            let exit = m.compiled.stages.get(&EXIT_STAGE)?;
            let &(addr, _) = exit.memory.first()?;
            Some(self.state.stages[EXIT_STAGE as usize - 1].memory[addr as usize])
        });
        ModuleReport {
            slot,
            vid: self.state.vid_of(slot),
            counters: self.state.stats.modules[slot as usize],
            system_count,
            faults: self.state.stages.iter().map(|s| s.faults[slot as usize]).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{DropReason, Verdict};
    use crate::net::{self, UdpFlow};
    use std::net::Ipv4Addr;

    const COUNTER: &str = r#"
        module counter;
        quota { cam_entries = 2; }
        field op: u16 @ 46;
        field hits: u32 @ 48;
        register c[1];
        table t {
            key op;
            entry (1) { hits = loadd c[0]; port 2; }
        }
    "#;

    fn sys() -> SystemConfig {
        SystemConfig::from_toml("[[tenants]]\nvid = 10\ncount_packets = true").unwrap()
    }

    fn pkt(vid: u16, op: u16) -> RawPacket {
        let f = UdpFlow::new(vid, Ipv4Addr::new(10, 0, 0, 1), Ipv4Addr::new(10, 0, 0, 2), 1, 2);
        let mut payload = op.to_be_bytes().to_vec();
        payload.extend([0; 6]);
        RawPacket::new(net::udp_frame(&f, &payload))
    }

    #[test]
    fn load_process_unload() {
        let mut c = Controller::new(7, sys()).unwrap();
        assert_eq!(c.state.slot_of(SYSTEM_VID), Some(0));
        let slot = c.load_module(COUNTER, 10).unwrap();
        assert_eq!(slot, 1);
        for i in 0..3u32 {
            let out = c.process(pkt(10, 1));
            assert_eq!(out.verdict, Verdict::Forwarded { ports: vec![2] });
            assert_eq!(net::read_be(&out.egress.unwrap().bytes, 48, 4), i as u64);
        }
        assert_eq!(c.read_register(slot, "c").unwrap(), vec![3]);
        assert_eq!(c.report(slot).system_count, Some(3));
        assert_eq!(c.process(pkt(10, 2)).drop_reason(), Some(DropReason::NoRoute));
        c.unload_module(slot).unwrap();
        assert_eq!(c.process(pkt(10, 1)).drop_reason(), Some(DropReason::UnknownModule));
        // Only the system binding remains.
        assert_eq!(c.state.dump_lines().len(), 1);
    }

    #[test]
    fn update_keeps_other_slots() {
        let mut c = Controller::new(7, SystemConfig::default()).unwrap();
        let a = c.load_module(COUNTER, 10).unwrap();
        let b = c.load_module(COUNTER, 11).unwrap();
        let before = c.module(b).unwrap().compiled.writes();
        c.update_module(a, &COUNTER.replace("entry (1)", "entry (5)")).unwrap();
        assert!(c.state.diff(&before).is_empty());
        assert_eq!(c.process(pkt(10, 5)).verdict, Verdict::Forwarded { ports: vec![2] });
        assert_eq!(c.process(pkt(10, 1)).drop_reason(), Some(DropReason::NoRoute));
        assert_eq!(c.process(pkt(11, 1)).verdict, Verdict::Forwarded { ports: vec![2] });
    }

    #[test]
    fn slot_and_vid_errors() {
        let mut c = Controller::new(7, SystemConfig::default()).unwrap();
        c.load_module(COUNTER, 10).unwrap();
        assert_eq!(c.load_module(COUNTER, 10), Err(ManagerError::VidInUse(10)));
        assert_eq!(c.load_module(COUNTER, 0), Err(ManagerError::ReservedVid(0)));
        assert_eq!(c.load_module(COUNTER, 0xFFF), Err(ManagerError::ReservedVid(0xFFF)));
        assert_eq!(c.load_module_at(COUNTER, 12, 1), Err(ManagerError::SlotInUse(1)));
        assert_eq!(c.unload_module(9), Err(ManagerError::UnknownSlot(9)));
    }

    #[test]
    fn cam_rows_run_out() {
        let mut c = Controller::new(7, SystemConfig::default()).unwrap();
        // Two rows per module in stage 2: eight modules fill its 16 rows.
        for vid in 1..=8 {
            c.load_module(COUNTER, vid).unwrap();
        }
        assert_eq!(c.load_module(COUNTER, 9), Err(ManagerError::CamExhausted { stage: 2, needed: 2, free: 0 }));
    }

    #[test]
    fn registry_fills_up() {
        let mut c = Controller::new(7, SystemConfig::default()).unwrap();
        let empty = "module e;";
        for vid in 1..32 {
            c.load_module(empty, vid).unwrap();
        }
        assert_eq!(c.load_module(empty, 40), Err(ManagerError::RegistryFull));
    }
}
