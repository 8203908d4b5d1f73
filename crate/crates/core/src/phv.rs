// SPDX-License-Identifier: Apache-2.0

//! Packet header vector.
//!
//! 24 value containers (8 each of 2, 4 and 6 bytes) plus a 32-byte metadata
//! block, 128 bytes when serialized. Flattened container indices are
//! 0-7 two-byte, 8-15 four-byte, 16-23 six-byte; index 24 names the
//! metadata block.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of value containers (the metadata block is not counted).
pub const NUM_CONTAINERS: usize = 24;
/// Flat index naming the metadata block.
pub const METADATA_INDEX: usize = 24;
/// Containers per kind.
pub const CONTAINERS_PER_KIND: usize = 8;
pub const METADATA_BYTES: usize = 32;
pub const PHV_BYTES: usize = 128;
/// Bytes of each packet visible to the parser and deparser.
pub const HEADER_REGION: usize = 128;
pub const DEFAULT_MTU: usize = 1500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ContainerKind {
    TwoByte,
    FourByte,
    SixByte,
}

impl ContainerKind {
    pub const ALL: [ContainerKind; 3] = [ContainerKind::TwoByte, ContainerKind::FourByte, ContainerKind::SixByte];

    pub const fn bytes(self) -> usize {
        match self {
            ContainerKind::TwoByte => 2,
            ContainerKind::FourByte => 4,
            ContainerKind::SixByte => 6,
        }
    }

    pub const fn bits(self) -> u32 {
        (self.bytes() * 8) as u32
    }

    pub const fn mask(self) -> u64 {
        (1u64 << self.bits()) - 1
    }

    /// Two-bit code used by parser actions and key-extractor operands.
    pub const fn code(self) -> u8 {
        match self {
            ContainerKind::TwoByte => 0,
            ContainerKind::FourByte => 1,
            ContainerKind::SixByte => 2,
        }
    }

    pub const fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(ContainerKind::TwoByte),
            1 => Some(ContainerKind::FourByte),
            2 => Some(ContainerKind::SixByte),
            _ => None,
        }
    }

    pub fn from_bits(bits: u32) -> Option<Self> {
        ContainerKind::ALL.into_iter().find(|k| k.bits() == bits)
    }

    /// First flat index of this kind.
    pub const fn base(self) -> usize {
        self.code() as usize * CONTAINERS_PER_KIND
    }

    /// Byte offset of this kind's region in the serialized PHV.
    const fn region_offset(self) -> usize {
        match self {
            ContainerKind::TwoByte => 0,
            ContainerKind::FourByte => 16,
            ContainerKind::SixByte => 48,
        }
    }
}

/// Address of one value container.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ContainerRef {
    pub kind: ContainerKind,
    pub index: u8,
}

impl ContainerRef {
    pub const fn new(kind: ContainerKind, index: u8) -> Self {
        ContainerRef { kind, index }
    }

    pub const fn flat(self) -> usize {
        self.kind.base() + self.index as usize
    }

    pub fn from_flat(flat: usize) -> Option<Self> {
        if flat >= NUM_CONTAINERS {
            return None;
        }
        let kind = ContainerKind::from_code((flat / CONTAINERS_PER_KIND) as u8)?;
        Some(ContainerRef { kind, index: (flat % CONTAINERS_PER_KIND) as u8 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Container {
    pub kind: ContainerKind,
    pub value: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PhvError {
    #[error("container index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("index 24 is the metadata block, not a value container")]
    MetadataNotValueContainer,
    #[error("value {value:#x} does not fit a {bits}-bit container")]
    ValueTooWide { value: u64, bits: u32 },
    #[error("serialized PHV must be {PHV_BYTES} bytes, got {0}")]
    BadLength(usize),
    #[error("metadata reserved bits are not zero")]
    ReservedMetadata,
}

/// Platform metadata carried alongside the containers.
///
/// Serialized layout (32 bytes, big-endian): byte 0 bit 0 discard,
/// bytes 1-4 destination port bitmap, byte 5 source port, bytes 6-7 packet
/// length, 8-9 queue length, 10-11 link utilisation, byte 12 module slot,
/// bytes 13-14 VID, the rest zero.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Metadata {
    pub discard: bool,
    pub dest_port_bitmap: u32,
    pub src_port: u8,
    pub pkt_len: u16,
    pub queue_len: u16,
    pub link_util: u16,
    pub module_slot: u8,
    pub vid: u16,
}

impl Metadata {
    pub fn to_bytes(&self) -> [u8; METADATA_BYTES] {
        let mut b = [0u8; METADATA_BYTES];
        b[0] = self.discard as u8;
        b[1..5].copy_from_slice(&self.dest_port_bitmap.to_be_bytes());
        b[5] = self.src_port;
        b[6..8].copy_from_slice(&self.pkt_len.to_be_bytes());
        b[8..10].copy_from_slice(&self.queue_len.to_be_bytes());
        b[10..12].copy_from_slice(&self.link_util.to_be_bytes());
        b[12] = self.module_slot & 0x1f;
        b[13..15].copy_from_slice(&(self.vid & 0x0fff).to_be_bytes());
        b
    }

    pub fn from_bytes(b: &[u8; METADATA_BYTES]) -> Result<Self, PhvError> {
        let vid = u16::from_be_bytes([b[13], b[14]]);
        if b[0] > 1 || b[12] > 0x1f || vid > 0x0fff || b[15..].iter().any(|&x| x != 0) {
            return Err(PhvError::ReservedMetadata);
        }
        Ok(Metadata {
            discard: b[0] == 1,
            dest_port_bitmap: u32::from_be_bytes([b[1], b[2], b[3], b[4]]),
            src_port: b[5],
            pkt_len: u16::from_be_bytes([b[6], b[7]]),
            queue_len: u16::from_be_bytes([b[8], b[9]]),
            link_util: u16::from_be_bytes([b[10], b[11]]),
            module_slot: b[12],
            vid,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Phv {
    values: [u64; NUM_CONTAINERS],
    pub metadata: Metadata,
}

impl Default for Phv {
    fn default() -> Self {
        Phv::zeroed()
    }
}

fn kind_of(flat: usize) -> Result<ContainerKind, PhvError> {
    match flat {
        METADATA_INDEX => Err(PhvError::MetadataNotValueContainer),
        f if f < NUM_CONTAINERS => Ok(ContainerRef::from_flat(f).unwrap().kind),
        f => Err(PhvError::IndexOutOfRange(f)),
    }
}

impl Phv {
    /// Fresh PHV handed to the parser for every packet.
    pub fn zeroed() -> Self {
        Phv { values: [0; NUM_CONTAINERS], metadata: Metadata::default() }
    }

    pub fn get(&self, flat: usize) -> Result<Container, PhvError> {
        let kind = kind_of(flat)?;
        Ok(Container { kind, value: self.values[flat] })
    }

    pub fn set(&mut self, flat: usize, value: u64) -> Result<(), PhvError> {
        let kind = kind_of(flat)?;
        if value > kind.mask() {
            return Err(PhvError::ValueTooWide { value, bits: kind.bits() });
        }
        self.values[flat] = value;
        Ok(())
    }

    /// Builder-style [`Phv::set`].
    pub fn with(mut self, flat: usize, value: u64) -> Result<Self, PhvError> {
        self.set(flat, value)?;
        Ok(self)
    }

    /// Raw value of a container; `flat` must be below 24.
    pub fn value(&self, flat: usize) -> u64 {
        self.values[flat]
    }

    /// Stores `value` truncated to the container width.
    pub(crate) fn store_wrapping(&mut self, flat: usize, value: u64) {
        let kind = ContainerRef::from_flat(flat).expect("value container").kind;
        self.values[flat] = value & kind.mask();
    }

    pub fn values(&self) -> &[u64; NUM_CONTAINERS] {
        &self.values
    }

    pub fn serialize(&self) -> [u8; PHV_BYTES] {
        let mut out = [0u8; PHV_BYTES];
        for (flat, &v) in self.values.iter().enumerate() {
            let r = ContainerRef::from_flat(flat).unwrap();
            let n = r.kind.bytes();
            let off = r.kind.region_offset() + r.index as usize * n;
            out[off..off + n].copy_from_slice(&v.to_be_bytes()[8 - n..]);
        }
        out[96..].copy_from_slice(&self.metadata.to_bytes());
        out
    }

    pub fn deserialize(bytes: &[u8]) -> Result<Self, PhvError> {
        if bytes.len() != PHV_BYTES {
            return Err(PhvError::BadLength(bytes.len()));
        }
        let mut phv = Phv::zeroed();
        for flat in 0..NUM_CONTAINERS {
            let r = ContainerRef::from_flat(flat).unwrap();
            let n = r.kind.bytes();
            let off = r.kind.region_offset() + r.index as usize * n;
            phv.values[flat] = bytes[off..off + n].iter().fold(0u64, |acc, &b| acc << 8 | b as u64);
        }
        let meta: &[u8; METADATA_BYTES] = bytes[96..].try_into().unwrap();
        phv.metadata = Metadata::from_bytes(meta)?;
        Ok(phv)
    }
}

/// A packet as seen on the wire.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RawPacket {
    #[serde(with = "hex_bytes")]
    pub bytes: Vec<u8>,
    #[serde(default)]
    pub arrival_seq: u64,
    #[serde(default)]
    pub ingress_port: u8,
}

impl RawPacket {
    pub fn new(bytes: Vec<u8>) -> Self {
        RawPacket { bytes, arrival_seq: 0, ingress_port: 0 }
    }

    pub fn with_seq(mut self, seq: u64) -> Self {
        self.arrival_seq = seq;
        self
    }

    pub fn from_hex(s: &str) -> Result<Self, hex::FromHexError> {
        let cleaned: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        Ok(RawPacket::new(hex::decode(cleaned)?))
    }

    pub fn to_hex(&self) -> String {
        hex::encode(&self.bytes)
    }

    /// Header bytes the parser may read: the first 128 bytes, zero-filled.
    pub fn header_region(&self) -> [u8; HEADER_REGION] {
        let mut h = [0u8; HEADER_REGION];
        let n = self.bytes.len().min(HEADER_REGION);
        h[..n].copy_from_slice(&self.bytes[..n]);
        h
    }
}

pub(crate) mod hex_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(b: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(b))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        hex::decode(s).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zeroed_is_all_zero_and_128_bytes() {
        let p = Phv::zeroed();
        assert!(p.values().iter().all(|&v| v == 0));
        assert_eq!(p.metadata.to_bytes(), [0u8; 32]);
        assert_eq!(p, Phv::zeroed());
        let s = p.serialize();
        assert_eq!(s.len(), 128);
        assert!(s.iter().all(|&b| b == 0));
    }

    #[test]
    fn get_by_kind_region() {
        let p = Phv::zeroed();
        assert_eq!(p.get(0).unwrap(), Container { kind: ContainerKind::TwoByte, value: 0 });
        assert_eq!(p.get(7).unwrap().kind, ContainerKind::TwoByte);
        assert_eq!(p.get(8).unwrap().kind, ContainerKind::FourByte);
        assert_eq!(p.get(23).unwrap().kind, ContainerKind::SixByte);
        assert_eq!(p.get(24), Err(PhvError::MetadataNotValueContainer));
        assert_eq!(p.get(25), Err(PhvError::IndexOutOfRange(25)));
    }

    #[test]
    fn set_checks_width() {
        let p = Phv::zeroed().with(8, 0xDEAD_BEEF).unwrap();
        assert_eq!(p.get(8).unwrap(), Container { kind: ContainerKind::FourByte, value: 0xDEAD_BEEF });
        let mut q = Phv::zeroed();
        assert_eq!(q.set(0, 0x1_0000), Err(PhvError::ValueTooWide { value: 0x1_0000, bits: 16 }));
        assert!(q.set(0, 0xffff).is_ok());
        assert!(q.set(16, 1 << 48).is_err());
        assert!(q.set(16, (1 << 48) - 1).is_ok());
        assert_eq!(q.set(24, 0), Err(PhvError::MetadataNotValueContainer));
    }

    #[test]
    fn six_byte_container_serializes_at_region_offset() {
        let p = Phv::zeroed().with(16, 0xAABB_CCDD_EEFF).unwrap();
        let s = p.serialize();
        // Six-byte region starts after 8*2 + 8*4 = 48 bytes.
        assert_eq!(&s[48..54], &[0xAA, 0xBB, 0xCC, 0xDD, 0xEE, 0xFF]);
        assert!(s[..48].iter().all(|&b| b == 0));
        assert!(s[54..].iter().all(|&b| b == 0));
    }

    #[test]
    fn metadata_layout() {
        let m = Metadata {
            discard: true,
            dest_port_bitmap: 0x0102_0304,
            src_port: 5,
            pkt_len: 0x0607,
            queue_len: 0x0809,
            link_util: 0x0a0b,
            module_slot: 12,
            vid: 0x0d0e,
        };
        let b = m.to_bytes();
        assert_eq!(&b[..15], &[1, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 0x0d, 0x0e]);
        assert!(b[15..].iter().all(|&x| x == 0));
        assert_eq!(Metadata::from_bytes(&b).unwrap(), m);
        let mut bad = b;
        bad[31] = 1;
        assert_eq!(Metadata::from_bytes(&bad), Err(PhvError::ReservedMetadata));
    }

    #[test]
    fn header_region_zero_fills() {
        let p = RawPacket::new(vec![1, 2, 3]);
        let h = p.header_region();
        assert_eq!(&h[..4], &[1, 2, 3, 0]);
        let long = RawPacket::new(vec![7; 300]);
        assert!(long.header_region().iter().all(|&b| b == 7));
    }

    fn arb_phv() -> impl Strategy<Value = Phv> {
        (
            proptest::array::uniform24(any::<u64>()),
            any::<bool>(),
            any::<u32>(),
            any::<u8>(),
            any::<(u16, u16, u16)>(),
            0u8..32,
            0u16..4096,
        )
            .prop_map(|(vals, discard, ports, src, (len, q, l), slot, vid)| {
                let mut p = Phv::zeroed();
                for (i, v) in vals.iter().enumerate() {
                    p.store_wrapping(i, *v);
                }
                p.metadata = Metadata {
                    discard,
                    dest_port_bitmap: ports,
                    src_port: src,
                    pkt_len: len,
                    queue_len: q,
                    link_util: l,
                    module_slot: slot,
                    vid,
                };
                p
            })
    }

    proptest! {
        #[test]
        fn serialize_round_trip(p in arb_phv()) {
            prop_assert_eq!(Phv::deserialize(&p.serialize()).unwrap(), p);
        }

        #[test]
        fn set_get_round_trip(flat in 0usize..24, v in any::<u64>()) {
            let kind = ContainerRef::from_flat(flat).unwrap().kind;
            let mut p = Phv::zeroed();
            let r = p.set(flat, v);
            if v <= kind.mask() {
                prop_assert!(r.is_ok());
                prop_assert_eq!(p.get(flat).unwrap().value, v);
            } else {
                prop_assert!(r.is_err());
                prop_assert_eq!(p.get(flat).unwrap().value, 0);
            }
        }
    }
}
