// SPDX-License-Identifier: Apache-2.0

//! The 193-bit lookup key shared by the key extractor, key mask and CAM.
//!
//! Bit 192 holds the predicate result. Below it the six key slots sit
//! most-significant first: 2B-A, 2B-B, 4B-A, 4B-B, 6B-A, 6B-B. The key is
//! stored right-aligned in 25 bytes with 7 leading zero pad bits.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::phv::ContainerKind;

pub const KEY_BITS: usize = 193;
pub const KEY_BYTES: usize = 25;
pub const PREDICATE_BIT: usize = 192;

/// One of the six container positions in the key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum KeySlot {
    TwoA,
    TwoB,
    FourA,
    FourB,
    SixA,
    SixB,
}

impl KeySlot {
    /// Extractor selector order.
    pub const ALL: [KeySlot; 6] =
        [KeySlot::TwoA, KeySlot::TwoB, KeySlot::FourA, KeySlot::FourB, KeySlot::SixA, KeySlot::SixB];

    pub const fn kind(self) -> ContainerKind {
        match self {
            KeySlot::TwoA | KeySlot::TwoB => ContainerKind::TwoByte,
            KeySlot::FourA | KeySlot::FourB => ContainerKind::FourByte,
            KeySlot::SixA | KeySlot::SixB => ContainerKind::SixByte,
        }
    }

    /// Position of the slot's least significant bit.
    pub const fn lsb(self) -> usize {
        match self {
            KeySlot::SixB => 0,
            KeySlot::SixA => 48,
            KeySlot::FourB => 96,
            KeySlot::FourA => 128,
            KeySlot::TwoB => 160,
            KeySlot::TwoA => 176,
        }
    }

    pub const fn position(self) -> usize {
        self as usize
    }

    /// The two slots of one container kind, A first.
    pub const fn for_kind(kind: ContainerKind) -> [KeySlot; 2] {
        match kind {
            ContainerKind::TwoByte => [KeySlot::TwoA, KeySlot::TwoB],
            ContainerKind::FourByte => [KeySlot::FourA, KeySlot::FourB],
            ContainerKind::SixByte => [KeySlot::SixA, KeySlot::SixB],
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Key(pub [u8; KEY_BYTES]);

impl Default for Key {
    fn default() -> Self {
        Key::ZERO
    }
}

impl Key {
    pub const ZERO: Key = Key([0; KEY_BYTES]);

    pub fn ones() -> Key {
        let mut k = [0xffu8; KEY_BYTES];
        k[0] = 0x01;
        Key(k)
    }

    pub fn bit(&self, i: usize) -> bool {
        debug_assert!(i < KEY_BITS);
        self.0[KEY_BYTES - 1 - i / 8] >> (i % 8) & 1 == 1
    }

    pub fn set_bit(&mut self, i: usize, on: bool) {
        debug_assert!(i < KEY_BITS);
        let byte = &mut self.0[KEY_BYTES - 1 - i / 8];
        if on {
            *byte |= 1 << (i % 8);
        } else {
            *byte &= !(1 << (i % 8));
        }
    }

    /// Writes the low bits of `value` into a slot, truncating to its width.
    pub fn set_slot(&mut self, slot: KeySlot, value: u64) {
        for b in 0..slot.kind().bits() as usize {
            self.set_bit(slot.lsb() + b, value >> b & 1 == 1);
        }
    }

    pub fn slot(&self, slot: KeySlot) -> u64 {
        (0..slot.kind().bits() as usize).rev().fold(0u64, |acc, b| acc << 1 | self.bit(slot.lsb() + b) as u64)
    }

    /// Sets every bit of a slot (used to build masks).
    pub fn fill_slot(&mut self, slot: KeySlot) {
        self.set_slot(slot, slot.kind().mask());
    }

    pub fn predicate(&self) -> bool {
        self.bit(PREDICATE_BIT)
    }

    pub fn and(&self, other: &Key) -> Key {
        let mut out = [0u8; KEY_BYTES];
        for (o, (a, b)) in out.iter_mut().zip(self.0.iter().zip(other.0.iter())) {
            *o = a & b;
        }
        Key(out)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&b| b == 0)
    }

    /// True when no bit is set outside `mask`.
    pub fn within(&self, mask: &Key) -> bool {
        self.and(mask) == *self
    }

    pub fn count_ones(&self) -> u32 {
        self.0.iter().map(|b| b.count_ones()).sum()
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl fmt::Debug for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Key({})", self.to_hex())
    }
}
