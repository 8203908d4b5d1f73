// SPDX-License-Identifier: Apache-2.0

//! Bit-exact configuration formats.
//!
//! Every table entry has a fixed width and is carried in a reconfiguration
//! packet as a big-endian bit string right-aligned in the smallest whole
//! number of bytes.

pub mod bits;
pub mod entries;
pub mod key;
pub mod reconfig;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use entries::*;
pub use key::{Key, KeySlot, KEY_BITS, KEY_BYTES, PREDICATE_BIT};
pub use reconfig::{
    build_reconfig_packet, parse_reconfig_packet, ReconfigError, ReconfigPacket, RECONFIG_UDP_PORT, RECONFIG_VID,
};

pub const NUM_STAGES: usize = 5;
pub const MAX_MODULES: usize = 32;
pub const STATEFUL_WORDS: usize = 256;

/// Table depths and widths of the modelled implementation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableGeometry {
    pub parser_depth: usize,
    pub key_extractor_depth: usize,
    pub key_mask_depth: usize,
    pub cam_depth: usize,
    pub vliw_depth: usize,
    pub page_table_depth: usize,
    pub stages: usize,
    pub stateful_words: usize,
}

impl TableGeometry {
    pub const DEFAULT: TableGeometry = TableGeometry {
        parser_depth: 32,
        key_extractor_depth: 32,
        key_mask_depth: 32,
        cam_depth: 16,
        vliw_depth: 16,
        page_table_depth: 32,
        stages: NUM_STAGES,
        stateful_words: STATEFUL_WORDS,
    };
}

impl Default for TableGeometry {
    fn default() -> Self {
        TableGeometry::DEFAULT
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("reserved bits set")]
    ReservedBitsSet,
    #[error("invalid container kind")]
    InvalidKind,
    #[error("expected a {expected}-bit entry, got {got_bytes} bytes")]
    WidthMismatch { expected: usize, got_bytes: usize },
    #[error("pad bits above the entry width are set")]
    PadBitsSet,
    #[error("undefined opcode")]
    InvalidOpcode,
    #[error("undefined operand selector")]
    InvalidOperand,
    #[error("page table entry exceeds stateful memory")]
    PageOverflow,
    #[error("non-canonical encoding: {0}")]
    NonCanonical(&'static str),
}

/// Kind of configurable resource, with its wire type code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResourceType {
    Parser = 0x00,
    KeyExtractor = 0x01,
    KeyMask = 0x02,
    Cam = 0x03,
    Vliw = 0x04,
    PageTable = 0x05,
    MemoryWord = 0x06,
    Deparser = 0x07,
    Registry = 0x08,
}

impl ResourceType {
    pub const ALL: [ResourceType; 9] = [
        ResourceType::Parser,
        ResourceType::KeyExtractor,
        ResourceType::KeyMask,
        ResourceType::Cam,
        ResourceType::Vliw,
        ResourceType::PageTable,
        ResourceType::MemoryWord,
        ResourceType::Deparser,
        ResourceType::Registry,
    ];

    pub fn from_code(c: u8) -> Option<Self> {
        ResourceType::ALL.into_iter().find(|t| *t as u8 == c)
    }

    pub const fn width_bits(self) -> usize {
        match self {
            ResourceType::Parser | ResourceType::Deparser => PARSER_ENTRY_BITS,
            ResourceType::KeyExtractor => KEY_EXTRACTOR_BITS,
            ResourceType::KeyMask => KEY_MASK_BITS,
            ResourceType::Cam => CAM_ENTRY_BITS,
            ResourceType::Vliw => VLIW_ENTRY_BITS,
            ResourceType::PageTable => PAGE_TABLE_BITS,
            ResourceType::MemoryWord => MEMORY_WORD_BITS,
            ResourceType::Registry => REGISTRY_ENTRY_BITS,
        }
    }

    pub const fn width_bytes(self) -> usize {
        bits::byte_len(self.width_bits())
    }

    pub fn depth(self, g: &TableGeometry) -> usize {
        match self {
            ResourceType::Parser | ResourceType::Deparser => g.parser_depth,
            ResourceType::KeyExtractor => g.key_extractor_depth,
            ResourceType::KeyMask => g.key_mask_depth,
            ResourceType::Cam => g.cam_depth,
            ResourceType::Vliw => g.vliw_depth,
            ResourceType::PageTable => g.page_table_depth,
            ResourceType::MemoryWord => g.stateful_words,
            ResourceType::Registry => MAX_MODULES,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ResourceType::Parser => "parser",
            ResourceType::KeyExtractor => "key_extractor",
            ResourceType::KeyMask => "key_mask",
            ResourceType::Cam => "cam",
            ResourceType::Vliw => "vliw",
            ResourceType::PageTable => "page_table",
            ResourceType::MemoryWord => "memory",
            ResourceType::Deparser => "deparser",
            ResourceType::Registry => "registry",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        ResourceType::ALL.into_iter().find(|t| t.name() == s)
    }

    const fn per_stage(self) -> bool {
        !matches!(self, ResourceType::Parser | ResourceType::Deparser | ResourceType::Registry)
    }
}

/// A configurable table: a resource type plus, for per-stage resources,
/// the stage number (1-5).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Resource {
    pub rtype: ResourceType,
    /// 0 for the parser, 1-5 for match-action stages, 6 deparser, 7 registry.
    pub stage: u8,
}

impl Resource {
    pub const PARSER: Resource = Resource { rtype: ResourceType::Parser, stage: 0 };
    pub const DEPARSER: Resource = Resource { rtype: ResourceType::Deparser, stage: 6 };
    pub const REGISTRY: Resource = Resource { rtype: ResourceType::Registry, stage: 7 };

    pub fn stage(rtype: ResourceType, stage: u8) -> Self {
        assert!(rtype.per_stage() && (1..=NUM_STAGES as u8).contains(&stage));
        Resource { rtype, stage }
    }

    /// 16-bit resource field: `[15:12]` zero, `[11:8]` stage selector,
    /// `[7:0]` type code.
    pub fn id(&self) -> u16 {
        (self.stage as u16) << 8 | self.rtype as u16
    }

    pub fn from_id(id: u16) -> Result<Self, ReconfigError> {
        if id >> 12 != 0 {
            return Err(ReconfigError::UnknownResource(id));
        }
        let rtype = ResourceType::from_code(id as u8).ok_or(ReconfigError::UnknownResource(id))?;
        let stage = (id >> 8 & 0xf) as u8;
        let ok = match rtype {
            ResourceType::Parser => stage == 0,
            ResourceType::Deparser => stage == 6,
            ResourceType::Registry => stage == 7,
            _ => (1..=NUM_STAGES as u8).contains(&stage),
        };
        if !ok {
            return Err(ReconfigError::UnknownResource(id));
        }
        Ok(Resource { rtype, stage })
    }

    /// Zero-based stage index for per-stage resources.
    pub fn stage_index(&self) -> Option<usize> {
        self.rtype.per_stage().then(|| self.stage as usize - 1)
    }
}

impl std::str::FromStr for Resource {
    type Err = String;

    /// Parses the display form: `parser`, `cam@2`, `registry`, ...
    fn from_str(res: &str) -> Result<Self, String> {
        let (name, stage) = match res.split_once('@') {
            Some((n, s)) => (n, s.parse::<u8>().map_err(|e| e.to_string())?),
            None => (res, 0),
        };
        let rtype = ResourceType::from_name(name).ok_or_else(|| format!("unknown resource {name}"))?;
        Ok(match rtype {
            ResourceType::Parser => Resource::PARSER,
            ResourceType::Deparser => Resource::DEPARSER,
            ResourceType::Registry => Resource::REGISTRY,
            t => {
                if !(1..=NUM_STAGES as u8).contains(&stage) {
                    return Err(format!("bad stage {stage}"));
                }
                Resource::stage(t, stage)
            }
        })
    }
}

impl std::fmt::Display for Resource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.rtype.per_stage() {
            write!(f, "{}@{}", self.rtype.name(), self.stage)
        } else {
            f.write_str(self.rtype.name())
        }
    }
}

/// A decoded table entry of any resource type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfigEntry {
    Parser(ParserEntry),
    KeyExtractor(KeyExtractorEntry),
    KeyMask(Key),
    Cam(CamEntry),
    Vliw(VliwEntry),
    PageTable(PageTableEntry),
    MemoryWord(u32),
    Deparser(ParserEntry),
    Registry(RegistryEntry),
}

impl ConfigEntry {
    pub fn rtype(&self) -> ResourceType {
        match self {
            ConfigEntry::Parser(_) => ResourceType::Parser,
            ConfigEntry::KeyExtractor(_) => ResourceType::KeyExtractor,
            ConfigEntry::KeyMask(_) => ResourceType::KeyMask,
            ConfigEntry::Cam(_) => ResourceType::Cam,
            ConfigEntry::Vliw(_) => ResourceType::Vliw,
            ConfigEntry::PageTable(_) => ResourceType::PageTable,
            ConfigEntry::MemoryWord(_) => ResourceType::MemoryWord,
            ConfigEntry::Deparser(_) => ResourceType::Deparser,
            ConfigEntry::Registry(_) => ResourceType::Registry,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        match self {
            ConfigEntry::Parser(e) | ConfigEntry::Deparser(e) => e.encode(),
            ConfigEntry::KeyExtractor(e) => e.encode(),
            ConfigEntry::KeyMask(k) => encode_key(k),
            ConfigEntry::Cam(e) => e.encode(),
            ConfigEntry::Vliw(e) => e.encode(),
            ConfigEntry::PageTable(e) => e.encode().to_be_bytes().to_vec(),
            ConfigEntry::MemoryWord(w) => w.to_be_bytes().to_vec(),
            ConfigEntry::Registry(e) => e.encode().to_be_bytes().to_vec(),
        }
    }

    pub fn decode(rtype: ResourceType, bytes: &[u8]) -> Result<Self, CodecError> {
        let width = rtype.width_bits();
        // Validates length and pad bits for every type.
        bits::BitReader::new(bytes, width)?;
        let word16 = || u16::from_be_bytes([bytes[0], bytes[1]]);
        Ok(match rtype {
            ResourceType::Parser => ConfigEntry::Parser(ParserEntry::decode(bytes)?),
            ResourceType::Deparser => ConfigEntry::Deparser(ParserEntry::decode(bytes)?),
            ResourceType::KeyExtractor => ConfigEntry::KeyExtractor(KeyExtractorEntry::decode(bytes)?),
            ResourceType::KeyMask => ConfigEntry::KeyMask(decode_key(bytes)?),
            ResourceType::Cam => ConfigEntry::Cam(CamEntry::decode(bytes)?),
            ResourceType::Vliw => ConfigEntry::Vliw(VliwEntry::decode(bytes)?),
            ResourceType::PageTable => ConfigEntry::PageTable(PageTableEntry::decode(word16())?),
            ResourceType::MemoryWord => {
                ConfigEntry::MemoryWord(u32::from_be_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]))
            }
            ResourceType::Registry => ConfigEntry::Registry(RegistryEntry::decode(word16())?),
        })
    }
}

/// One entry write: which table, which row, what value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigWrite {
    pub resource: Resource,
    pub index: u8,
    pub entry: ConfigEntry,
}

impl ConfigWrite {
    pub fn new(resource: Resource, index: u8, entry: ConfigEntry) -> Self {
        assert_eq!(resource.rtype, entry.rtype(), "entry type does not match resource");
        ConfigWrite { resource, index, entry }
    }

    /// One line of the compiled-module dump format:
    /// `<resource> <index> <hex>`.
    pub fn dump_line(&self) -> String {
        format!("{} {} {}", self.resource, self.index, hex::encode(self.entry.encode()))
    }

    pub fn parse_dump_line(line: &str) -> Result<Self, String> {
        let mut it = line.split_whitespace();
        let (res, idx, hx) = match (it.next(), it.next(), it.next(), it.next()) {
            (Some(r), Some(i), Some(h), None) => (r, i, h),
            _ => return Err(format!("expected 3 fields: {line:?}")),
        };
        let resource: Resource = res.parse()?;
        let rtype = resource.rtype;
        let index = idx.parse::<u8>().map_err(|e| e.to_string())?;
        let bytes = hex::decode(hx).map_err(|e| e.to_string())?;
        let entry = ConfigEntry::decode(rtype, &bytes).map_err(|e| e.to_string())?;
        Ok(ConfigWrite { resource, index, entry })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometry_constants() {
        let g = TableGeometry::default();
        assert_eq!(
            (g.parser_depth, g.key_extractor_depth, g.key_mask_depth, g.cam_depth, g.vliw_depth, g.page_table_depth),
            (32, 32, 32, 16, 16, 32)
        );
        assert_eq!(g.stages, 5);
    }

    #[test]
    fn resource_id_encoding() {
        let r = Resource::stage(ResourceType::KeyExtractor, 3);
        assert_eq!(r.id(), 0x0301);
        assert_eq!(Resource::from_id(0x0301).unwrap(), r);
        assert_eq!(Resource::PARSER.id(), 0x0000);
        assert_eq!(Resource::DEPARSER.id(), 0x0607);
        assert_eq!(Resource::REGISTRY.id(), 0x0708);
        assert!(Resource::from_id(0x00ff).is_err());
        assert!(Resource::from_id(0x0600).is_err()); // parser type in deparser stage
        assert!(Resource::from_id(0x0003).is_err()); // CAM without a stage
        assert!(Resource::from_id(0x1301).is_err());
    }

    #[test]
    fn dump_line_round_trip() {
        let w = ConfigWrite::new(
            Resource::stage(ResourceType::PageTable, 2),
            5,
            ConfigEntry::PageTable(PageTableEntry::new(16, 8).unwrap()),
        );
        assert_eq!(w.dump_line(), "page_table@2 5 1008");
        assert_eq!(ConfigWrite::parse_dump_line(&w.dump_line()).unwrap(), w);
    }
}
