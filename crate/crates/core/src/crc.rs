//! Bitwise CRC over bit sequences: zero initial state, no reflection, no final XOR.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Generator polynomial of degree `width`; `poly` holds the coefficients
/// below the leading term (bit `k` is the coefficient of `x^k`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CrcSpec {
    pub width: u32,
    pub poly: u64,
}

impl CrcSpec {
    /// `x^7 + x^3 + 1`.
    pub const CRC7: CrcSpec = CrcSpec {
        width: 7,
        poly: 0x09,
    };
    /// `x^4 + x + 1`.
    pub const CRC4: CrcSpec = CrcSpec {
        width: 4,
        poly: 0x3,
    };

    pub fn new(width: u32, poly: u64) -> Result<Self> {
        if width == 0 || width > 32 {
            return invalid(format!("crc width {width} outside 1..=32"));
        }
        if poly >> width != 0 {
            return invalid(format!("polynomial {poly:#x} has terms at or above x^{width}"));
        }
        Ok(Self { width, poly })
    }

    /// Parses the polynomial from its coefficient string, highest degree
    /// first, e.g. `"10001001"` for `x^7 + x^3 + 1`.
    pub fn from_bit_string(s: &str) -> Result<Self> {
        let s = s.trim();
        if !s.starts_with('1') || s.len() < 2 || !s.chars().all(|c| c == '0' || c == '1') {
            return invalid(format!("bad polynomial bit string {s:?}"));
        }
        let width = (s.len() - 1) as u32;
        let poly = u64::from_str_radix(&s[1..], 2).map_err(|e| crate::Error::InvalidArgument(e.to_string()))?;
        Self::new(width, poly)
    }

    pub fn len(&self) -> usize {
        self.width as usize
    }

    pub fn is_empty(&self) -> bool {
        self.width == 0
    }

    /// Remainder of `data(x) · x^width` modulo the generator, most significant bit first.
    pub fn compute(&self, data: &[u8]) -> Vec<u8> {
        let w = self.width;
        let top = 1u64 << (w - 1);
        let mask = (1u64 << w) - 1;
        let mut reg = 0u64;
        for &b in data {
            let feedback = ((reg & top) != 0) ^ (b & 1 == 1);
            reg = (reg << 1) & mask;
            if feedback {
                reg ^= self.poly;
            }
        }
        (0..w).rev().map(|k| (reg >> k & 1) as u8).collect()
    }

    /// True when the last `width` bits equal the CRC of the bits before them.
    pub fn check(&self, data_with_crc: &[u8]) -> bool {
        let w = self.len();
        if data_with_crc.len() < w {
            return false;
        }
        let (data, crc) = data_with_crc.split_at(data_with_crc.len() - w);
        self.compute(data) == crc
    }
}
