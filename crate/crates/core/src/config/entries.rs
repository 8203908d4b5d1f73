// SPDX-License-Identifier: Apache-2.0

//! Configuration table entries and their fixed-width encodings.

use serde::{Deserialize, Serialize};

use super::bits::{BitReader, BitWriter};
use super::key::{Key, KEY_BITS};
use super::CodecError;
use crate::phv::{ContainerKind, ContainerRef};

pub const PARSE_ACTION_BITS: usize = 16;
pub const PARSER_ACTIONS: usize = 10;
pub const PARSER_ENTRY_BITS: usize = PARSE_ACTION_BITS * PARSER_ACTIONS;
pub const KEY_EXTRACTOR_BITS: usize = 38;
pub const KEY_MASK_BITS: usize = KEY_BITS;
pub const CAM_ENTRY_BITS: usize = 12 + KEY_BITS;
pub const ALU_ACTION_BITS: usize = 25;
pub const VLIW_ALUS: usize = 25;
pub const VLIW_ENTRY_BITS: usize = ALU_ACTION_BITS * VLIW_ALUS;
pub const PAGE_TABLE_BITS: usize = 16;
pub const MEMORY_WORD_BITS: usize = 32;
pub const REGISTRY_ENTRY_BITS: usize = 16;

// ---------------------------------------------------------------- parser

/// One parser (or deparser) action: copy a container to/from a byte offset.
///
/// Word layout: `[15:13]` reserved, `[12:6]` bytes from head, `[5:4]`
/// container kind, `[3:1]` container index, `[0]` valid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParseAction {
    pub offset: u8,
    pub container: ContainerRef,
    pub valid: bool,
}

impl Default for ParseAction {
    fn default() -> Self {
        ParseAction::INVALID
    }
}

impl ParseAction {
    pub const INVALID: ParseAction =
        ParseAction { offset: 0, container: ContainerRef::new(ContainerKind::TwoByte, 0), valid: false };

    pub fn new(offset: u8, container: ContainerRef) -> Self {
        ParseAction { offset, container, valid: true }
    }

    pub fn encode(&self) -> u16 {
        assert!(self.offset < 128 && self.container.index < 8);
        (self.offset as u16) << 6
            | (self.container.kind.code() as u16) << 4
            | (self.container.index as u16) << 1
            | self.valid as u16
    }

    pub fn decode(w: u16) -> Result<Self, CodecError> {
        if w >> 13 != 0 {
            return Err(CodecError::ReservedBitsSet);
        }
        let kind = ContainerKind::from_code((w >> 4 & 0b11) as u8).ok_or(CodecError::InvalidKind)?;
        Ok(ParseAction {
            offset: (w >> 6 & 0x7f) as u8,
            container: ContainerRef::new(kind, (w >> 1 & 0b111) as u8),
            valid: w & 1 == 1,
        })
    }
}

/// Ten parse actions for one module; action 0 occupies the top 16 bits.
/// The deparser table uses the same format.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParserEntry {
    pub actions: [ParseAction; PARSER_ACTIONS],
}

impl ParserEntry {
    pub fn from_actions(list: &[ParseAction]) -> Self {
        assert!(list.len() <= PARSER_ACTIONS);
        let mut e = ParserEntry::default();
        e.actions[..list.len()].copy_from_slice(list);
        e
    }

    pub fn valid_actions(&self) -> impl Iterator<Item = &ParseAction> {
        self.actions.iter().filter(|a| a.valid)
    }

    pub fn encode(&self) -> Vec<u8> {
        self.actions.iter().flat_map(|a| a.encode().to_be_bytes()).collect()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CodecError> {
        let mut r = BitReader::new(bytes, PARSER_ENTRY_BITS)?;
        let mut e = ParserEntry::default();
        for a in e.actions.iter_mut() {
            let w = r.take(16) as u16;
            *a = ParseAction::decode(w)?;
            if !a.valid && w != 0 {
                return Err(CodecError::NonCanonical("invalid parse action with nonzero fields"));
            }
        }
        Ok(e)
    }
}

// --------------------------------------------------------- key extractor

/// Comparison opcode of the key-extractor predicate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CmpOp {
    #[default]
    False = 0,
    Eq = 1,
    Ne = 2,
    Gt = 3,
    Ge = 4,
    Lt = 5,
    Le = 6,
    True = 7,
}

impl CmpOp {
    pub fn from_code(c: u8) -> Option<Self> {
        Some(match c {
            0 => CmpOp::False,
            1 => CmpOp::Eq,
            2 => CmpOp::Ne,
            3 => CmpOp::Gt,
            4 => CmpOp::Ge,
            5 => CmpOp::Lt,
            6 => CmpOp::Le,
            7 => CmpOp::True,
            _ => return None,
        })
    }

    pub fn eval(self, a: u16, b: u16) -> bool {
        match self {
            CmpOp::False => false,
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::True => true,
        }
    }
}

/// Predicate operand: a 7-bit immediate or a container reference.
///
/// Byte layout: bit 7 set means bits `[6:0]` are an immediate; otherwise
/// bits `[6:5]` are the container kind, `[4:2]` the index and `[1:0]` zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KeyOperand {
    Imm(u8),
    Container(ContainerRef),
}

impl Default for KeyOperand {
    fn default() -> Self {
        KeyOperand::Container(ContainerRef::new(ContainerKind::TwoByte, 0))
    }
}

impl KeyOperand {
    pub fn encode(&self) -> u8 {
        match *self {
            KeyOperand::Imm(v) => {
                assert!(v < 128);
                0x80 | v
            }
            KeyOperand::Container(c) => c.kind.code() << 5 | c.index << 2,
        }
    }

    pub fn decode(b: u8) -> Result<Self, CodecError> {
        if b & 0x80 != 0 {
            return Ok(KeyOperand::Imm(b & 0x7f));
        }
        if b & 0b11 != 0 {
            return Err(CodecError::ReservedBitsSet);
        }
        let kind = ContainerKind::from_code(b >> 5 & 0b11).ok_or(CodecError::InvalidKind)?;
        Ok(KeyOperand::Container(ContainerRef::new(kind, b >> 2 & 0b111)))
    }
}

/// Per-module key extractor configuration for one stage.
///
/// Layout: `[37:20]` six 3-bit selectors (2B-A first), `[19:16]` compare
/// opcode, `[15:8]` operand A, `[7:0]` operand B.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KeyExtractorEntry {
    pub selectors: [u8; 6],
    pub cmp: CmpOp,
    pub operand_a: KeyOperand,
    pub operand_b: KeyOperand,
}

impl KeyExtractorEntry {
    pub fn encode(&self) -> Vec<u8> {
        let mut w = BitWriter::new();
        for &s in &self.selectors {
            assert!(s < 8);
            w.push(s as u64, 3);
        }
        w.push(self.cmp as u64, 4).push(self.operand_a.encode() as u64, 8).push(self.operand_b.encode() as u64, 8);
        w.finish()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CodecError> {
        let mut r = BitReader::new(bytes, KEY_EXTRACTOR_BITS)?;
        let mut selectors = [0u8; 6];
        for s in selectors.iter_mut() {
            *s = r.take(3) as u8;
        }
        let cmp = CmpOp::from_code(r.take(4) as u8).ok_or(CodecError::InvalidOpcode)?;
        let operand_a = KeyOperand::decode(r.take(8) as u8)?;
        let operand_b = KeyOperand::decode(r.take(8) as u8)?;
        Ok(KeyExtractorEntry { selectors, cmp, operand_a, operand_b })
    }
}

// ----------------------------------------------------------- mask / CAM

pub fn encode_key(k: &Key) -> Vec<u8> {
    k.0.to_vec()
}

pub fn decode_key(bytes: &[u8]) -> Result<Key, CodecError> {
    // Validates length and zero padding.
    BitReader::new(bytes, KEY_BITS)?;
    Ok(Key(bytes.try_into().unwrap()))
}

/// A match entry: owning VID plus the masked key.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CamEntry {
    pub vid: u16,
    pub key: Key,
}

impl CamEntry {
    pub fn new(vid: u16, key: Key) -> Self {
        CamEntry { vid, key }
    }

    /// The all-zero entry clears a CAM row.
    pub fn is_clear(&self) -> bool {
        self.vid == 0 && self.key.is_zero()
    }

    pub fn encode(&self) -> Vec<u8> {
        assert!(self.vid < 4096);
        let mut w = BitWriter::new();
        w.push(self.vid as u64, 12).push_padded(&self.key.0, KEY_BITS);
        w.finish()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CodecError> {
        let mut r = BitReader::new(bytes, CAM_ENTRY_BITS)?;
        let vid = r.take(12) as u16;
        let key = r.take_padded(KEY_BITS);
        Ok(CamEntry { vid, key: Key(key.try_into().unwrap()) })
    }
}

// ------------------------------------------------------------------ VLIW

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AluOpcode {
    #[default]
    Nop = 0x0,
    Add = 0x1,
    Sub = 0x2,
    Addi = 0x3,
    Subi = 0x4,
    Set = 0x5,
    Load = 0x6,
    Store = 0x7,
    Loadd = 0x8,
    Port = 0x9,
    Discard = 0xA,
}

impl AluOpcode {
    pub fn from_code(c: u8) -> Option<Self> {
        use AluOpcode::*;
        Some(match c {
            0x0 => Nop,
            0x1 => Add,
            0x2 => Sub,
            0x3 => Addi,
            0x4 => Subi,
            0x5 => Set,
            0x6 => Load,
            0x7 => Store,
            0x8 => Loadd,
            0x9 => Port,
            0xA => Discard,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        use AluOpcode::*;
        match self {
            Nop => "nop",
            Add => "add",
            Sub => "sub",
            Addi => "addi",
            Subi => "subi",
            Set => "set",
            Load => "load",
            Store => "store",
            Loadd => "loadd",
            Port => "port",
            Discard => "discard",
        }
    }

    pub fn is_memory(self) -> bool {
        matches!(self, AluOpcode::Load | AluOpcode::Store | AluOpcode::Loadd)
    }
}

/// Operand selector values beyond the 24 value containers.
pub mod operand {
    /// Packet length from the metadata block.
    pub const PKT_LEN: u8 = 24;
    pub const LINK_UTIL: u8 = 25;
    pub const QUEUE_LEN: u8 = 26;
    pub const SRC_PORT: u8 = 27;
    pub const IMMEDIATE: u8 = 31;

    pub fn is_valid(sel: u8) -> bool {
        sel <= SRC_PORT || sel == IMMEDIATE
    }
}

/// One ALU's slice of a VLIW instruction.
///
/// Layout: `[24:21]` opcode, `[20:16]` operand A selector, `[15:11]`
/// operand B selector, `[10:0]` immediate / virtual word address.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AluAction {
    pub opcode: AluOpcode,
    pub op_a: u8,
    pub op_b: u8,
    pub imm: u16,
}

pub const IMM_MAX: u16 = (1 << 11) - 1;

impl AluAction {
    pub const NOP: AluAction = AluAction { opcode: AluOpcode::Nop, op_a: 0, op_b: 0, imm: 0 };

    pub fn new(opcode: AluOpcode, op_a: u8, op_b: u8, imm: u16) -> Self {
        AluAction { opcode, op_a, op_b, imm }
    }

    pub fn encode(&self) -> u32 {
        assert!(self.op_a < 32 && self.op_b < 32 && self.imm <= IMM_MAX);
        (self.opcode as u32) << 21 | (self.op_a as u32) << 16 | (self.op_b as u32) << 11 | self.imm as u32
    }

    pub fn decode(w: u32) -> Result<Self, CodecError> {
        if w >> 25 != 0 {
            return Err(CodecError::WidthMismatch { expected: ALU_ACTION_BITS, got_bytes: 4 });
        }
        let opcode = AluOpcode::from_code((w >> 21) as u8).ok_or(CodecError::InvalidOpcode)?;
        let op_a = (w >> 16 & 0x1f) as u8;
        let op_b = (w >> 11 & 0x1f) as u8;
        if !operand::is_valid(op_a) || !operand::is_valid(op_b) {
            return Err(CodecError::InvalidOperand);
        }
        Ok(AluAction { opcode, op_a, op_b, imm: (w & 0x7ff) as u16 })
    }
}

/// 25 ALU actions; entry `i` drives the ALU of container `i`, entry 24 the
/// metadata ALU. Action 0 occupies the most significant bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VliwEntry {
    pub actions: [AluAction; VLIW_ALUS],
}

impl Default for VliwEntry {
    fn default() -> Self {
        VliwEntry { actions: [AluAction::NOP; VLIW_ALUS] }
    }
}

impl VliwEntry {
    pub fn is_nop(&self) -> bool {
        self.actions.iter().all(|a| a.opcode == AluOpcode::Nop)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut w = BitWriter::new();
        for a in &self.actions {
            w.push(a.encode() as u64, ALU_ACTION_BITS as u32);
        }
        w.finish()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CodecError> {
        let mut r = BitReader::new(bytes, VLIW_ENTRY_BITS)?;
        let mut e = VliwEntry::default();
        for a in e.actions.iter_mut() {
            *a = AluAction::decode(r.take(ALU_ACTION_BITS as u32) as u32)?;
        }
        Ok(e)
    }
}

// ------------------------------------------------------------ page table

/// Stateful-memory window of one module in one stage: words
/// `[base, base + range)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PageTableEntry {
    pub base: u8,
    pub range: u8,
}

impl PageTableEntry {
    pub fn new(base: u8, range: u8) -> Result<Self, CodecError> {
        if base as usize + range as usize > super::STATEFUL_WORDS {
            return Err(CodecError::PageOverflow);
        }
        Ok(PageTableEntry { base, range })
    }

    pub fn translate(&self, vaddr: u16) -> Option<usize> {
        (vaddr < self.range as u16).then(|| self.base as usize + vaddr as usize)
    }

    pub fn encode(&self) -> u16 {
        (self.base as u16) << 8 | self.range as u16
    }

    pub fn decode(w: u16) -> Result<Self, CodecError> {
        PageTableEntry::new((w >> 8) as u8, w as u8)
    }
}

// -------------------------------------------------------------- registry

/// VID binding of one slot. Layout: `[15]` valid, `[14:12]` zero, `[11:0]` VID.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RegistryEntry {
    pub valid: bool,
    pub vid: u16,
}

impl RegistryEntry {
    pub fn bind(vid: u16) -> Self {
        RegistryEntry { valid: true, vid }
    }

    pub fn encode(&self) -> u16 {
        assert!(self.vid < 4096);
        (self.valid as u16) << 15 | self.vid
    }

    pub fn decode(w: u16) -> Result<Self, CodecError> {
        if w >> 12 & 0b111 != 0 {
            return Err(CodecError::ReservedBitsSet);
        }
        let e = RegistryEntry { valid: w >> 15 == 1, vid: w & 0x0fff };
        if !e.valid && e.vid != 0 {
            return Err(CodecError::NonCanonical("unbound registry entry with nonzero vid"));
        }
        Ok(e)
    }
}
