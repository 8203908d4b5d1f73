// SPDX-License-Identifier: Apache-2.0

//! MSB-first bit packing into byte strings padded on the left.

use super::CodecError;

/// Number of bytes needed to carry `width` bits.
pub const fn byte_len(width: usize) -> usize {
    width.div_ceil(8)
}

#[derive(Debug, Default)]
pub struct BitWriter {
    bits: Vec<bool>,
}

impl BitWriter {
    pub fn new() -> Self {
        BitWriter::default()
    }

    /// Appends the low `width` bits of `value`, most significant first.
    pub fn push(&mut self, value: u64, width: u32) -> &mut Self {
        debug_assert!(width == 64 || value >> width == 0, "{value:#x} wider than {width}");
        for i in (0..width).rev() {
            self.bits.push(value >> i & 1 == 1);
        }
        self
    }

    /// Appends the low `width` bits of a left-padded byte string.
    pub fn push_padded(&mut self, bytes: &[u8], width: usize) -> &mut Self {
        let skip = bytes.len() * 8 - width;
        for i in skip..bytes.len() * 8 {
            self.bits.push(bytes[i / 8] >> (7 - i % 8) & 1 == 1);
        }
        self
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Emits the bits right-aligned in `ceil(len/8)` bytes.
    pub fn finish(&self) -> Vec<u8> {
        let n = byte_len(self.bits.len());
        let pad = n * 8 - self.bits.len();
        let mut out = vec![0u8; n];
        for (i, &b) in self.bits.iter().enumerate() {
            if b {
                let pos = pad + i;
                out[pos / 8] |= 0x80 >> (pos % 8);
            }
        }
        out
    }
}

#[derive(Debug)]
pub struct BitReader<'a> {
    bytes: &'a [u8],
    pos: usize,
    end: usize,
}

impl<'a> BitReader<'a> {
    /// Reader over a `width`-bit string right-aligned in `bytes`. The byte
    /// count must be exactly `ceil(width/8)` and the pad bits must be zero.
    pub fn new(bytes: &'a [u8], width: usize) -> Result<Self, CodecError> {
        if bytes.len() != byte_len(width) {
            return Err(CodecError::WidthMismatch { expected: width, got_bytes: bytes.len() });
        }
        let pad = bytes.len() * 8 - width;
        let mut r = BitReader { bytes, pos: 0, end: bytes.len() * 8 };
        if pad > 0 && r.take(pad as u32) != 0 {
            return Err(CodecError::PadBitsSet);
        }
        Ok(r)
    }

    pub fn take(&mut self, width: u32) -> u64 {
        let mut v = 0u64;
        for _ in 0..width {
            assert!(self.pos < self.end, "bit reader overrun");
            let bit = self.bytes[self.pos / 8] >> (7 - self.pos % 8) & 1;
            v = v << 1 | bit as u64;
            self.pos += 1;
        }
        v
    }

    /// Takes `width` bits as a left-padded byte string.
    pub fn take_padded(&mut self, width: usize) -> Vec<u8> {
        let mut w = BitWriter::new();
        for _ in 0..width {
            let bit = self.take(1);
            w.push(bit, 1);
        }
        w.finish()
    }

    pub fn remaining(&self) -> usize {
        self.end - self.pos
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pads_on_the_left() {
        let mut w = BitWriter::new();
        w.push(0b101, 3).push(0xff, 8);
        assert_eq!(w.len(), 11);
        // 00000101 11111111
        assert_eq!(w.finish(), vec![0x05, 0xff]);
        let bytes = w.finish();
        let mut r = BitReader::new(&bytes, 11).unwrap();
        assert_eq!(r.take(3), 0b101);
        assert_eq!(r.take(8), 0xff);
        assert_eq!(r.remaining(), 0);
    }

    #[test]
    fn rejects_bad_length_and_pad() {
        assert!(matches!(BitReader::new(&[0, 0, 0], 11), Err(CodecError::WidthMismatch { .. })));
        assert!(matches!(BitReader::new(&[0x08, 0], 11), Err(CodecError::PadBitsSet)));
    }

    #[test]
    fn padded_round_trip() {
        let src = [0x01u8, 0x23, 0x45];
        let mut w = BitWriter::new();
        w.push_padded(&src, 17);
        assert_eq!(w.finish(), src.to_vec());
        let mut r = BitReader::new(&src, 17).unwrap();
        assert_eq!(r.take_padded(17), src.to_vec());
    }
}
