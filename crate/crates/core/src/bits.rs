//! Finite binary strings, Elias-gamma operand coding and the doubled-length
//! pairing code.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A finite binary string with explicit length. The empty string is valid.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitString {
    bits: Vec<bool>,
}

impl BitString {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    /// The `len` low bits of `value`, most significant first.
    pub fn from_value(value: u64, len: u32) -> Self {
        assert!(len <= 64, "from_value supports at most 64 bits");
        assert!(
            len == 64 || value >> len == 0,
            "value {value} does not fit in {len} bits"
        );
        let bits = (0..len).rev().map(|i| (value >> i) & 1 == 1).collect();
        Self { bits }
    }

    /// Numeric value with the first bit most significant; `None` above 64 bits.
    pub fn to_value(&self) -> Option<u64> {
        if self.bits.len() > 64 {
            return None;
        }
        Some(self.bits.iter().fold(0u64, |acc, &b| (acc << 1) | b as u64))
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, i: usize) -> Option<bool> {
        self.bits.get(i).copied()
    }

    pub fn push(&mut self, bit: bool) {
        self.bits.push(bit);
    }

    pub fn extend_from(&mut self, other: &BitString) {
        self.bits.extend_from_slice(&other.bits);
    }

    pub fn concat(&self, other: &BitString) -> BitString {
        let mut out = self.clone();
        out.extend_from(other);
        out
    }

    /// Bits packed MSB-first into bytes, zero padded, lower-case hex.
    pub fn to_hex(&self) -> String {
        let mut bytes = vec![0u8; self.bits.len().div_ceil(8)];
        for (i, &b) in self.bits.iter().enumerate() {
            if b {
                bytes[i / 8] |= 0x80 >> (i % 8);
            }
        }
        hex::encode(bytes)
    }

    pub fn from_hex(hex_str: &str, len: usize) -> Result<Self> {
        let bytes = hex::decode(hex_str).map_err(|e| Error::Malformed(format!("hex: {e}")))?;
        if bytes.len() != len.div_ceil(8) {
            return Err(Error::Malformed(format!(
                "hex payload of {} bytes cannot hold exactly {len} bits",
                bytes.len()
            )));
        }
        let bits: Vec<bool> = (0..len).map(|i| bytes[i / 8] & (0x80 >> (i % 8)) != 0).collect();
        // padding bits must be zero so that the encoding is canonical
        for i in len..bytes.len() * 8 {
            if bytes[i / 8] & (0x80 >> (i % 8)) != 0 {
                return Err(Error::Malformed("non-zero padding bits".into()));
            }
        }
        Ok(Self { bits })
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.bits.is_empty() {
            return f.write_str("λ");
        }
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString(\"{self}\")")
    }
}

impl FromStr for BitString {
    type Err = Error;

    /// Accepts `0`/`1` characters; `""` and `"λ"` denote the empty string.
    fn from_str(s: &str) -> Result<Self> {
        if s == "λ" {
            return Ok(Self::empty());
        }
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Malformed(format!("unexpected character {other:?} in bit string"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self::from_bits)
    }
}

#[derive(Serialize, Deserialize)]
struct HexRepr {
    len: usize,
    hex: String,
}

impl Serialize for BitString {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        HexRepr {
            len: self.len(),
            hex: self.to_hex(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = HexRepr::deserialize(deserializer)?;
        BitString::from_hex(&repr.hex, repr.len).map_err(serde::de::Error::custom)
    }
}

/// Elias-gamma code: `floor(log2 q)` zeros followed by the binary expansion of `q`.
pub fn gamma_encode(q: u64) -> Result<BitString> {
    if q == 0 {
        return Err(Error::GammaZero);
    }
    let width = 64 - q.leading_zeros();
    let mut out = BitString::from_bits(vec![false; width as usize - 1]);
    out.extend_from(&BitString::from_value(q, width));
    Ok(out)
}

/// Length in bits of the gamma code of `q >= 1`.
pub fn gamma_len(q: u64) -> u32 {
    debug_assert!(q > 0);
    2 * (63 - q.leading_zeros()) + 1
}

/// Decodes one gamma code starting at `pos`; returns the value and the position
/// after it.
pub fn gamma_decode(bits: &BitString, pos: usize) -> Result<(u64, usize)> {
    let b = bits.bits();
    let mut zeros = 0usize;
    let mut i = pos;
    while i < b.len() && !b[i] {
        zeros += 1;
        i += 1;
    }
    if i >= b.len() {
        return Err(Error::Malformed("gamma code runs past the end".into()));
    }
    if zeros > 63 {
        return Err(Error::Malformed("gamma value exceeds 64 bits".into()));
    }
    if i + zeros >= b.len() {
        return Err(Error::Malformed("gamma code runs past the end".into()));
    }
    let mut value = 0u64;
    for &bit in &b[i..=i + zeros] {
        value = (value << 1) | bit as u64;
    }
    Ok((value, i + zeros + 1))
}

/// Self-delimiting pair code: doubled `bin(|x2|)`, then `01`, then `x1`, then `x2`.
/// `bin(0)` is the empty string, so a code for an empty `x2` starts with `01`.
pub fn pair_encode(x1: &BitString, x2: &BitString) -> BitString {
    let mut out = BitString::empty();
    let len = x2.len() as u64;
    if len > 0 {
        for bit in BitString::from_value(len, 64 - len.leading_zeros()).bits() {
            out.push(*bit);
            out.push(*bit);
        }
    }
    out.push(false);
    out.push(true);
    out.extend_from(x1);
    out.extend_from(x2);
    out
}

pub fn pair_decode(code: &BitString) -> Result<(BitString, BitString)> {
    let b = code.bits();
    let mut i = 0;
    let mut len: u64 = 0;
    loop {
        match (b.get(i), b.get(i + 1)) {
            (Some(false), Some(true)) => break,
            (Some(&x), Some(&y)) if x == y => {
                if len >> 62 != 0 {
                    return Err(Error::Malformed("pair length overflows".into()));
                }
                len = (len << 1) | x as u64;
                i += 2;
            }
            (Some(_), Some(_)) => return Err(Error::Malformed("pair header has a `10` block".into())),
            _ => return Err(Error::Malformed("pair header is unterminated".into())),
        }
    }
    // bin(n) for n > 0 starts with 1; a leading doubled zero would make the code ambiguous
    if i > 0 && !b[0] {
        return Err(Error::Malformed("pair header has a leading zero".into()));
    }
    let body = &b[i + 2..];
    let len = usize::try_from(len).map_err(|_| Error::Malformed("pair length overflows".into()))?;
    if len > body.len() {
        return Err(Error::Malformed("pair body is shorter than the declared length".into()));
    }
    let split = body.len() - len;
    Ok((
        BitString::from_bits(body[..split].to_vec()),
        BitString::from_bits(body[split..].to_vec()),
    ))
}
