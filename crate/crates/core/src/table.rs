//! Extractor candidates as color tables, their generators and the `KEXT`
//! binary format.
//!
//! Binary layout (all integers little-endian):
//!
//! ```text
//! "KEXT" | 0x01 | n: u16 | m: u16 | flag: u8 (0 two-source, 1 single-source) | colors: u16...
//! ```
//!
//! Two-source colors are row-major (`x` outer, `y` inner).

use std::path::Path;

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;

use crate::error::{Error, Result};
use crate::gf2;

pub const MAGIC: &[u8; 4] = b"KEXT";
pub const FORMAT_VERSION: u8 = 0x01;
/// Largest input length for a two-source table (`4^n` cells).
pub const MAX_TWO_SOURCE_BITS: u32 = 12;
pub const MAX_SINGLE_SOURCE_BITS: u32 = 24;
pub const MAX_OUTPUT_BITS: u32 = 16;

/// Deterministic color stream: SplitMix64 seeded with `seed`, one draw per
/// cell in storage order, color = top `m` bits of the draw.
fn random_colors(count: usize, m: u32, seed: u64) -> Vec<u16> {
    let mut rng = SplitMix64::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let draw = rng.next_u64();
            if m == 0 {
                0
            } else {
                (draw >> (64 - m)) as u16
            }
        })
        .collect()
}

fn check_m(m: u32) -> Result<()> {
    if m > MAX_OUTPUT_BITS {
        return Err(Error::InvalidParameter(format!(
            "output length m = {m} exceeds {MAX_OUTPUT_BITS}"
        )));
    }
    Ok(())
}

/// `f : [N] × [N] → [M]` with `N = 2^n`, `M = 2^m`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TwoSourceTable {
    n: u32,
    m: u32,
    colors: Vec<u16>,
}

impl TwoSourceTable {
    pub fn new(n: u32, m: u32, colors: Vec<u16>) -> Result<Self> {
        if n > MAX_TWO_SOURCE_BITS {
            return Err(Error::InvalidParameter(format!(
                "two-source input length n = {n} exceeds {MAX_TWO_SOURCE_BITS}"
            )));
        }
        check_m(m)?;
        if colors.len() != 1usize << (2 * n) {
            return Err(Error::InvalidParameter(format!(
                "expected {} cells, got {}",
                1usize << (2 * n),
                colors.len()
            )));
        }
        if let Some(&c) = colors.iter().find(|&&c| (c as u64) >> m != 0) {
            return Err(Error::InvalidParameter(format!("color {c} is not below 2^{m}")));
        }
        Ok(Self { n, m, colors })
    }

    fn from_fn(n: u32, m: u32, f: impl Fn(u64, u64) -> u16) -> Result<Self> {
        let side = 1u64 << n;
        let colors = (0..side).flat_map(|x| (0..side).map(move |y| (x, y))).map(|(x, y)| f(x, y)).collect();
        Self::new(n, m, colors)
    }

    /// `⟨x, y⟩ mod 2`.
    pub fn inner_product(n: u32) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("inner product needs n >= 1".into()));
        }
        Self::from_fn(n, 1, |x, y| ((x & y).count_ones() & 1) as u16)
    }

    /// Low `m` bits of `x · y` in GF(2^n).
    pub fn gf2_mult(n: u32, m: u32) -> Result<Self> {
        if !(1..=16).contains(&n) || m == 0 || m > n {
            return Err(Error::InvalidParameter(format!(
                "GF(2^n) product needs 1 <= m <= n <= 16, got n = {n}, m = {m}"
            )));
        }
        let mask = (1u32 << m) - 1;
        Self::from_fn(n, m, |x, y| (gf2::mul(x as u32, y as u32, n) & mask) as u16)
    }

    pub fn random(n: u32, m: u32, seed: u64) -> Result<Self> {
        check_m(m)?;
        if n > MAX_TWO_SOURCE_BITS {
            return Err(Error::InvalidParameter(format!("n = {n} too large")));
        }
        Self::new(n, m, random_colors(1usize << (2 * n), m, seed))
    }

    pub fn constant(n: u32, m: u32, c: u16) -> Result<Self> {
        check_m(m)?;
        if (c as u64) >> m != 0 {
            return Err(Error::InvalidParameter(format!("constant {c} is not below 2^{m}")));
        }
        Self::from_fn(n, m, |_, _| c)
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    /// `N = 2^n`.
    pub fn side(&self) -> usize {
        1usize << self.n
    }

    /// `M = 2^m`.
    pub fn num_colors(&self) -> usize {
        1usize << self.m
    }

    #[inline]
    pub fn color(&self, x: u64, y: u64) -> u16 {
        self.colors[((x as usize) << self.n) | y as usize]
    }

    pub fn colors(&self) -> &[u16] {
        &self.colors
    }

    /// `(x, y) ↦ f(y, x)`.
    pub fn transpose(&self) -> Self {
        let side = self.side() as u64;
        let colors = (0..side)
            .flat_map(|x| (0..side).map(move |y| (x, y)))
            .map(|(x, y)| self.color(y, x))
            .collect();
        Self {
            n: self.n,
            m: self.m,
            colors,
        }
    }

    /// Same cells, output space enlarged to `2^m_new` colors.
    pub fn widen(&self, m_new: u32) -> Result<Self> {
        if m_new < self.m {
            return Err(Error::InvalidParameter("widen cannot shrink the output space".into()));
        }
        Self::new(self.n, m_new, self.colors.clone())
    }

    /// Per-color preimage counts over the full table.
    pub fn census(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.num_colors()];
        for &c in &self.colors {
            counts[c as usize] += 1;
        }
        counts
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        encode(self.n, self.m, 0, &self.colors)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (n, m, flag, colors) = decode(bytes)?;
        if flag != 0 {
            return Err(Error::Malformed("file holds a single-source table".into()));
        }
        Self::new(n, m, colors)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&read_file(path)?)
    }
}

/// `f : [N] → [M]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SingleSourceTable {
    n: u32,
    m: u32,
    colors: Vec<u16>,
}

impl SingleSourceTable {
    pub fn new(n: u32, m: u32, colors: Vec<u16>) -> Result<Self> {
        if n > MAX_SINGLE_SOURCE_BITS {
            return Err(Error::InvalidParameter(format!("n = {n} too large")));
        }
        check_m(m)?;
        if colors.len() != 1usize << n {
            return Err(Error::InvalidParameter(format!(
                "expected {} cells, got {}",
                1usize << n,
                colors.len()
            )));
        }
        if let Some(&c) = colors.iter().find(|&&c| (c as u64) >> m != 0) {
            return Err(Error::InvalidParameter(format!("color {c} is not below 2^{m}")));
        }
        Ok(Self { n, m, colors })
    }

    /// Keeps the `m` most significant bits.
    pub fn truncate(n: u32, m: u32) -> Result<Self> {
        if m > n {
            return Err(Error::InvalidParameter(format!("cannot truncate {n} bits to {m}")));
        }
        check_m(m)?;
        Self::new(n, m, (0..1u64 << n).map(|x| (x >> (n - m)) as u16).collect())
    }

    pub fn random(n: u32, m: u32, seed: u64) -> Result<Self> {
        check_m(m)?;
        if n > MAX_SINGLE_SOURCE_BITS {
            return Err(Error::InvalidParameter(format!("n = {n} too large")));
        }
        Self::new(n, m, random_colors(1usize << n, m, seed))
    }

    pub fn constant(n: u32, m: u32, c: u16) -> Result<Self> {
        check_m(m)?;
        Self::new(n, m, vec![c; 1usize << n])
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn color(&self, x: u64) -> u16 {
        self.colors[x as usize]
    }

    pub fn colors(&self) -> &[u16] {
        &self.colors
    }

    pub fn census(&self) -> Vec<u64> {
        let mut counts = vec![0u64; 1usize << self.m];
        for &c in &self.colors {
            counts[c as usize] += 1;
        }
        counts
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        encode(self.n, self.m, 1, &self.colors)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (n, m, flag, colors) = decode(bytes)?;
        if flag != 1 {
            return Err(Error::Malformed("file holds a two-source table".into()));
        }
        Self::new(n, m, colors)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&read_file(path)?)
    }
}

/// Either kind of table, as read from a `KEXT` file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AnyTable {
    Two(TwoSourceTable),
    Single(SingleSourceTable),
}

impl AnyTable {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (n, m, flag, colors) = decode(bytes)?;
        match flag {
            0 => Ok(AnyTable::Two(TwoSourceTable::new(n, m, colors)?)),
            _ => Ok(AnyTable::Single(SingleSourceTable::new(n, m, colors)?)),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&read_file(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        match self {
            AnyTable::Two(t) => t.save(path),
            AnyTable::Single(t) => t.save(path),
        }
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

fn encode(n: u32, m: u32, flag: u8, colors: &[u16]) -> Vec<u8> {
    let mut out = Vec::with_capacity(10 + 2 * colors.len());
    out.extend_from_slice(MAGIC);
    out.push(FORMAT_VERSION);
    out.extend_from_slice(&(n as u16).to_le_bytes());
    out.extend_from_slice(&(m as u16).to_le_bytes());
    out.push(flag);
    for c in colors {
        out.extend_from_slice(&c.to_le_bytes());
    }
    out
}

fn decode(bytes: &[u8]) -> Result<(u32, u32, u8, Vec<u16>)> {
    if bytes.len() < 10 || &bytes[..4] != MAGIC {
        return Err(Error::Malformed("missing KEXT header".into()));
    }
    if bytes[4] != FORMAT_VERSION {
        return Err(Error::Malformed(format!("unsupported table version {}", bytes[4])));
    }
    let n = u16::from_le_bytes([bytes[5], bytes[6]]) as u32;
    let m = u16::from_le_bytes([bytes[7], bytes[8]]) as u32;
    let flag = bytes[9];
    if flag > 1 {
        return Err(Error::Malformed(format!("unknown table flag {flag}")));
    }
    let body = &bytes[10..];
    if body.len() % 2 != 0 {
        return Err(Error::Malformed("odd-length color payload".into()));
    }
    let colors = body.chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]])).collect();
    Ok((n, m, flag, colors))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inner_product_examples() {
        assert_eq!(TwoSourceTable::inner_product(1).unwrap().colors(), &[0, 0, 0, 1]);
        let ip2 = TwoSourceTable::inner_product(2).unwrap();
        assert_eq!(ip2.color(0b01, 0b01), 1);
        assert_eq!(ip2.census(), vec![10, 6]);
        assert!(TwoSourceTable::inner_product(0).is_err());
    }

    #[test]
    fn gf2_examples() {
        let t = TwoSourceTable::gf2_mult(2, 1).unwrap();
        assert_eq!(t.color(0b11, 0b11), 0);
        assert_eq!(TwoSourceTable::gf2_mult(2, 2).unwrap().color(0b11, 0b11), 0b10);
        for n in 1..=6 {
            let t = TwoSourceTable::gf2_mult(n, n).unwrap();
            for x in 0..1u64 << n {
                assert_eq!(t.color(0, x), 0);
                for y in 0..1u64 << n {
                    assert_eq!(t.color(x, y), t.color(y, x));
                }
            }
        }
        assert!(TwoSourceTable::gf2_mult(3, 4).is_err());
        assert!(TwoSourceTable::gf2_mult(17, 1).is_err());
    }

    #[test]
    fn generators() {
        assert_eq!(TwoSourceTable::constant(2, 1, 0).unwrap().colors(), &[0; 16]);
        assert!(TwoSourceTable::constant(2, 1, 2).is_err());
        assert_eq!(
            TwoSourceTable::random(3, 2, 9).unwrap(),
            TwoSourceTable::random(3, 2, 9).unwrap()
        );
        assert_ne!(
            TwoSourceTable::random(3, 2, 9).unwrap(),
            TwoSourceTable::random(3, 2, 10).unwrap()
        );
        assert_eq!(SingleSourceTable::truncate(3, 2).unwrap().color(0b101), 0b10);
        assert!(TwoSourceTable::random(2, 17, 0).is_err());
    }

    #[test]
    fn random_stream_is_pinned() {
        // SplitMix64(seed = 1): first draw 0x910a2dec89025cc1, top two bits 0b10
        let t = TwoSourceTable::random(1, 2, 1).unwrap();
        assert_eq!(t.colors()[0], 0b10);
        let s = SingleSourceTable::random(1, 16, 1).unwrap();
        assert_eq!(s.colors()[0], 0x910a);
    }

    #[test]
    fn binary_format_layout() {
        let t = TwoSourceTable::inner_product(1).unwrap();
        let bytes = t.to_bytes();
        assert_eq!(&bytes[..10], b"KEXT\x01\x01\x00\x01\x00\x00");
        assert_eq!(&bytes[10..], &[0, 0, 0, 0, 0, 0, 1, 0]);
        assert_eq!(TwoSourceTable::from_bytes(&bytes).unwrap(), t);
        assert!(SingleSourceTable::from_bytes(&bytes).is_err());
        let s = SingleSourceTable::truncate(2, 1).unwrap();
        assert_eq!(s.to_bytes()[9], 1);
        assert_eq!(AnyTable::from_bytes(&s.to_bytes()).unwrap(), AnyTable::Single(s));
        assert!(TwoSourceTable::from_bytes(b"KEXT\x02\x01\x00\x01\x00\x00").is_err());
        assert!(TwoSourceTable::from_bytes(b"TXEK\x01\x01\x00\x01\x00\x00").is_err());
    }

    #[test]
    fn transpose_is_involutive() {
        let t = TwoSourceTable::random(3, 3, 4).unwrap();
        assert_eq!(t.transpose().transpose(), t);
        assert_eq!(t.transpose().color(1, 5), t.color(5, 1));
    }
}
