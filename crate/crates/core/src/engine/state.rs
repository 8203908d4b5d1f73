// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use crate::config::{
    CamEntry, ConfigEntry, ConfigWrite, Key, KeyExtractorEntry, PageTableEntry, ParserEntry, RegistryEntry,
    ResourceType, TableGeometry, VliwEntry, MAX_MODULES,
};

/// Packet filter registers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterRegisters {
    pub cookie: u32,
    /// Reconfiguration packets consumed so far. Only ever increases.
    pub reconfig_counter: u32,
    /// Bit `s` set while slot `s` is being reconfigured.
    pub update_bitmap: u32,
}

impl FilterRegisters {
    pub fn under_update(&self, slot: u8) -> bool {
        self.update_bitmap >> slot & 1 == 1
    }
}

/// All tables and memory of one match-action stage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageState {
    pub key_extractor: Vec<KeyExtractorEntry>,
    pub key_mask: Vec<Key>,
    /// `None` rows never match.
    pub cam: Vec<Option<CamEntry>>,
    pub vliw: Vec<VliwEntry>,
    pub page_table: Vec<PageTableEntry>,
    pub memory: Vec<u32>,
    /// Out-of-range stateful accesses per slot.
    pub faults: Vec<u64>,
}

impl StageState {
    pub fn new(g: &TableGeometry) -> Self {
        StageState {
            key_extractor: vec![KeyExtractorEntry::default(); g.key_extractor_depth],
            key_mask: vec![Key::ZERO; g.key_mask_depth],
            cam: vec![None; g.cam_depth],
            vliw: vec![VliwEntry::default(); g.vliw_depth],
            page_table: vec![PageTableEntry::default(); g.page_table_depth],
            memory: vec![0; g.stateful_words],
            faults: vec![0; MAX_MODULES],
        }
    }
}

/// Per-slot traffic counters kept by the pipeline itself.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModuleCounters {
    /// Packets that passed the filter and entered the parser.
    pub packets: u64,
    pub bytes: u64,
    pub forwarded: u64,
    pub dropped: u64,
    /// Dropped at the filter while the slot was under update.
    pub dropped_under_update: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemStats {
    pub link_util: u16,
    pub queue_len: u16,
    pub modules: Vec<ModuleCounters>,
}

impl Default for SystemStats {
    fn default() -> Self {
        SystemStats { link_util: 0, queue_len: 0, modules: vec![ModuleCounters::default(); MAX_MODULES] }
    }
}

/// Why a reconfiguration packet that passed the cookie check was not applied.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    DuplicateKey,
    SlotMismatch,
    BadIndex,
    ReservedVid,
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApplyResult {
    Applied,
    Rejected(RejectReason),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectRecord {
    pub counter: u32,
    pub target: String,
    pub reason: RejectReason,
}

const REJECT_LOG_LIMIT: usize = 1024;

/// Complete mutable state of the pipeline.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineState {
    pub geometry: TableGeometry,
    pub filter: FilterRegisters,
    pub parser: Vec<ParserEntry>,
    pub deparser: Vec<ParserEntry>,
    pub stages: Vec<StageState>,
    /// Slot-indexed VID bindings.
    pub registry: Vec<RegistryEntry>,
    pub stats: SystemStats,
    /// Most recent rejected reconfiguration writes.
    pub reject_log: Vec<RejectRecord>,
    pub next_seq: u64,
}

impl PipelineState {
    pub fn new(cookie: u32) -> Self {
        let g = TableGeometry::default();
        PipelineState {
            geometry: g,
            filter: FilterRegisters { cookie, ..Default::default() },
            parser: vec![ParserEntry::default(); g.parser_depth],
            deparser: vec![ParserEntry::default(); g.parser_depth],
            stages: (0..g.stages).map(|_| StageState::new(&g)).collect(),
            registry: vec![RegistryEntry::default(); MAX_MODULES],
            stats: SystemStats::default(),
            reject_log: Vec::new(),
            next_seq: 0,
        }
    }

    /// Slot bound to `vid`, if any.
    pub fn slot_of(&self, vid: u16) -> Option<u8> {
        self.registry.iter().position(|e| e.valid && e.vid == vid).map(|s| s as u8)
    }

    pub fn vid_of(&self, slot: u8) -> Option<u16> {
        self.registry.get(slot as usize).filter(|e| e.valid).map(|e| e.vid)
    }

    pub(crate) fn log_reject(&mut self, target: String, reason: RejectReason) {
        if self.reject_log.len() == REJECT_LOG_LIMIT {
            self.reject_log.remove(0);
        }
        self.reject_log.push(RejectRecord { counter: self.filter.reconfig_counter, target, reason });
    }

    /// Current value of the row addressed by a write, for dump diffs.
    pub fn read_entry(&self, resource: crate::config::Resource, index: u8) -> Option<ConfigEntry> {
        let i = index as usize;
        let stage = resource.stage_index().map(|s| &self.stages[s]);
        Some(match resource.rtype {
            ResourceType::Parser => ConfigEntry::Parser(*self.parser.get(i)?),
            ResourceType::Deparser => ConfigEntry::Deparser(*self.deparser.get(i)?),
            ResourceType::Registry => ConfigEntry::Registry(*self.registry.get(i)?),
            ResourceType::KeyExtractor => ConfigEntry::KeyExtractor(*stage?.key_extractor.get(i)?),
            ResourceType::KeyMask => ConfigEntry::KeyMask(*stage?.key_mask.get(i)?),
            ResourceType::Cam => ConfigEntry::Cam(stage?.cam.get(i)?.unwrap_or_default()),
            ResourceType::Vliw => ConfigEntry::Vliw(*stage?.vliw.get(i)?),
            ResourceType::PageTable => ConfigEntry::PageTable(*stage?.page_table.get(i)?),
            ResourceType::MemoryWord => ConfigEntry::MemoryWord(*stage?.memory.get(i)?),
        })
    }

    /// Writes that disagree with the current state.
    pub fn diff(&self, writes: &[ConfigWrite]) -> Vec<ConfigWrite> {
        writes.iter().filter(|w| self.read_entry(w.resource, w.index) != Some(w.entry)).copied().collect()
    }

    /// Structured-text dump of every non-default row.
    pub fn dump_lines(&self) -> Vec<String> {
        use crate::config::Resource;
        let mut out = Vec::new();
        let mut push = |res: Resource, idx: usize, e: ConfigEntry, is_default: bool| {
            if !is_default {
                out.push(ConfigWrite { resource: res, index: idx as u8, entry: e }.dump_line());
            }
        };
        for (i, e) in self.parser.iter().enumerate() {
            push(Resource::PARSER, i, ConfigEntry::Parser(*e), *e == ParserEntry::default());
        }
        for (s, st) in self.stages.iter().enumerate() {
            let stage = s as u8 + 1;
            for (i, e) in st.key_extractor.iter().enumerate() {
                let r = Resource::stage(ResourceType::KeyExtractor, stage);
                push(r, i, ConfigEntry::KeyExtractor(*e), *e == KeyExtractorEntry::default());
            }
            for (i, e) in st.key_mask.iter().enumerate() {
                push(Resource::stage(ResourceType::KeyMask, stage), i, ConfigEntry::KeyMask(*e), e.is_zero());
            }
            for (i, e) in st.cam.iter().enumerate() {
                if let Some(c) = e {
                    push(Resource::stage(ResourceType::Cam, stage), i, ConfigEntry::Cam(*c), false);
                }
            }
            for (i, e) in st.vliw.iter().enumerate() {
                push(Resource::stage(ResourceType::Vliw, stage), i, ConfigEntry::Vliw(*e), e.is_nop());
            }
            for (i, e) in st.page_table.iter().enumerate() {
                let r = Resource::stage(ResourceType::PageTable, stage);
                push(r, i, ConfigEntry::PageTable(*e), *e == PageTableEntry::default());
            }
            for (i, w) in st.memory.iter().enumerate() {
                push(Resource::stage(ResourceType::MemoryWord, stage), i, ConfigEntry::MemoryWord(*w), *w == 0);
            }
        }
        for (i, e) in self.deparser.iter().enumerate() {
            push(Resource::DEPARSER, i, ConfigEntry::Deparser(*e), *e == ParserEntry::default());
        }
        for (i, e) in self.registry.iter().enumerate() {
            push(Resource::REGISTRY, i, ConfigEntry::Registry(*e), !e.valid);
        }
        out
    }
}
