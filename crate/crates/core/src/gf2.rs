//! Carry-less arithmetic in GF(2^n) for n = 1..=16.

/// Irreducible polynomial of degree `n` (bit `i` is the coefficient of `x^i`),
/// indexed by `n`. Entry 0 is unused.
///
/// | n | polynomial |
/// |---|------------|
/// | 1 | x + 1 |
/// | 2 | x² + x + 1 |
/// | 3 | x³ + x + 1 |
/// | 4 | x⁴ + x + 1 |
/// | 5 | x⁵ + x² + 1 |
/// | 6 | x⁶ + x + 1 |
/// | 7 | x⁷ + x + 1 |
/// | 8 | x⁸ + x⁴ + x³ + x + 1 |
/// | 9 | x⁹ + x⁴ + 1 |
/// | 10 | x¹⁰ + x³ + 1 |
/// | 11 | x¹¹ + x² + 1 |
/// | 12 | x¹² + x³ + 1 |
/// | 13 | x¹³ + x⁴ + x³ + x + 1 |
/// | 14 | x¹⁴ + x⁵ + 1 |
/// | 15 | x¹⁵ + x + 1 |
/// | 16 | x¹⁶ + x⁵ + x³ + x + 1 |
pub const IRREDUCIBLE: [u32; 17] = [
    0, 0x3, 0x7, 0xB, 0x13, 0x25, 0x43, 0x83, 0x11B, 0x211, 0x409, 0x805, 0x1009, 0x201B, 0x4021,
    0x8003, 0x1002B,
];

/// Carry-less product of two polynomials of degree < 32.
pub fn clmul(a: u32, b: u32) -> u64 {
    let mut acc = 0u64;
    let mut a = a as u64;
    let mut b = b;
    while b != 0 {
        if b & 1 == 1 {
            acc ^= a;
        }
        a <<= 1;
        b >>= 1;
    }
    acc
}

/// Remainder of `value` modulo `poly` over GF(2).
pub fn reduce(mut value: u64, poly: u32) -> u32 {
    let degree = 31 - poly.leading_zeros();
    while value != 0 {
        let top = 63 - value.leading_zeros();
        if top < degree {
            break;
        }
        value ^= (poly as u64) << (top - degree);
    }
    value as u32
}

/// Field product in GF(2^n) with the fixed modulus.
pub fn mul(a: u32, b: u32, n: u32) -> u32 {
    reduce(clmul(a, b), IRREDUCIBLE[n as usize])
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Trial division by every polynomial of degree 1..=deg/2.
    fn is_irreducible(poly: u32) -> bool {
        let deg = 31 - poly.leading_zeros();
        (2u32..1 << (deg / 2 + 1)).all(|d| reduce(poly as u64, d) != 0)
    }

    #[test]
    fn table_is_irreducible_with_right_degree() {
        for n in 1..=16u32 {
            let p = IRREDUCIBLE[n as usize];
            assert_eq!(31 - p.leading_zeros(), n, "degree of entry {n}");
            assert!(is_irreducible(p), "entry {n} = {p:#x} is reducible");
        }
        assert!(!is_irreducible(0b101)); // x² + 1 = (x + 1)²
    }

    #[test]
    fn hand_example() {
        // (x+1)(x+1) = x² + 1 ≡ x (mod x² + x + 1)
        assert_eq!(clmul(0b11, 0b11), 0b101);
        assert_eq!(mul(0b11, 0b11, 2), 0b10);
    }

    #[test]
    fn nonzero_elements_are_invertible() {
        for n in 1..=8u32 {
            for a in 1..1u32 << n {
                assert!((1..1u32 << n).any(|b| mul(a, b, n) == 1), "n={n} a={a}");
            }
        }
    }
}
