use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A fixed-width bit vector. Bit 0 is the least significant bit of the hex
/// form.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct KeyBits(Vec<bool>);

impl KeyBits {
    pub fn zeros(width: usize) -> Self {
        KeyBits(vec![false; width])
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        KeyBits(bits)
    }

    /// Low `width` bits of `value` (width ≤ 64).
    pub fn from_u64(value: u64, width: usize) -> Self {
        assert!(width <= 64);
        KeyBits((0..width).map(|i| (value >> i) & 1 == 1).collect())
    }

    pub fn to_u64(&self) -> Option<u64> {
        if self.0.len() > 64 {
            return None;
        }
        Some(
            self.0
                .iter()
                .enumerate()
                .fold(0u64, |acc, (i, &b)| acc | ((b as u64) << i)),
        )
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn set(&mut self, i: usize, v: bool) {
        self.0[i] = v;
    }

    pub fn flipped(&self, i: usize) -> Self {
        let mut k = self.clone();
        k.0[i] = !k.0[i];
        k
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.0.iter().copied()
    }

    /// Big-endian hex with `ceil(width / 4)` digits.
    pub fn to_hex(&self) -> String {
        let digits = self.0.len().div_ceil(4);
        (0..digits)
            .rev()
            .map(|d| {
                let nib = (0..4).fold(0u32, |acc, b| {
                    let i = d * 4 + b;
                    acc | ((i < self.0.len() && self.0[i]) as u32) << b
                });
                char::from_digit(nib, 16).unwrap()
            })
            .collect()
    }

    pub fn from_hex(hex: &str, width: usize) -> Result<Self> {
        let s = hex.trim().trim_start_matches("0x");
        if s.is_empty() && width > 0 {
            return Err(Error::InvalidHex(hex.to_string()));
        }
        let mut bits = vec![false; width];
        for (d, ch) in s.chars().rev().enumerate() {
            let nib = ch.to_digit(16).ok_or_else(|| Error::InvalidHex(hex.to_string()))?;
            for b in 0..4 {
                let v = (nib >> b) & 1 == 1;
                let i = d * 4 + b;
                if i < width {
                    bits[i] = v;
                } else if v {
                    return Err(Error::InvalidHex(hex.to_string()));
                }
            }
        }
        Ok(KeyBits(bits))
    }

    /// MSB-first string of `0`/`1`.
    pub fn to_bit_string(&self) -> String {
        self.0.iter().rev().map(|&b| if b { '1' } else { '0' }).collect()
    }
}

impl fmt::Debug for KeyBits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "KeyBits({}'h{})", self.0.len(), self.to_hex())
    }
}

/// Serialized as `{"width": m, "hex": "..."}`.
#[derive(Serialize, Deserialize)]
struct KeyBitsRepr {
    width: usize,
    hex: String,
}

impl Serialize for KeyBits {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        KeyBitsRepr {
            width: self.len(),
            hex: self.to_hex(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for KeyBits {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = KeyBitsRepr::deserialize(d)?;
        KeyBits::from_hex(&r.hex, r.width).map_err(serde::de::Error::custom)
    }
}
