//! Packed activation patterns.
//!
//! An [`ActivationPattern`] is an immutable bit vector over all hidden ReLU
//! units of a network, in layer-major order: bit `(layer - 1) * width + unit`
//! holds unit `unit` of hidden layer `layer`. A bit is 1 iff the unit's
//! pre-activation is strictly positive.

use crate::error::{Error, Result};

/// Bit vector of length `n_bits` packed into `u64` words.
///
/// Bits above `n_bits` in the last word are always zero, so `Eq` and `Hash`
/// on the word slice are exact pattern equality.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ActivationPattern {
    n_bits: usize,
    words: Vec<u64>,
}

impl ActivationPattern {
    /// All-zero pattern of the given length.
    pub fn zeroed(n_bits: usize) -> Self {
        Self {
            n_bits,
            words: vec![0u64; n_bits.div_ceil(64)],
        }
    }

    /// Builds a pattern from a bit iterator; the iterator defines bit order.
    pub fn from_bits<I: IntoIterator<Item = bool>>(n_bits: usize, bits: I) -> Result<Self> {
        let mut pattern = Self::zeroed(n_bits);
        let mut count = 0usize;
        for (i, bit) in bits.into_iter().enumerate() {
            if i >= n_bits {
                return Err(Error::PatternLength {
                    expected: n_bits,
                    got: i + 1,
                });
            }
            if bit {
                pattern.words[i / 64] |= 1u64 << (i % 64);
            }
            count = i + 1;
        }
        if count != n_bits {
            return Err(Error::PatternLength {
                expected: n_bits,
                got: count,
            });
        }
        Ok(pattern)
    }

    pub fn len(&self) -> usize {
        self.n_bits
    }

    pub fn is_empty(&self) -> bool {
        self.n_bits == 0
    }

    pub fn get(&self, bit: usize) -> bool {
        assert!(bit < self.n_bits, "bit index {bit} out of range {}", self.n_bits);
        self.words[bit / 64] >> (bit % 64) & 1 == 1
    }

    /// Number of set bits.
    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Parity of the popcount; adjacent RTG patterns always have opposite parity.
    pub fn parity(&self) -> bool {
        self.count_ones() % 2 == 1
    }

    /// Copy of this pattern with one bit flipped.
    pub fn flipped(&self, bit: usize) -> Self {
        assert!(bit < self.n_bits, "bit index {bit} out of range {}", self.n_bits);
        let mut out = self.clone();
        out.words[bit / 64] ^= 1u64 << (bit % 64);
        out
    }

    /// In-place flip, for hot loops that flip and restore. Not public: a
    /// published pattern never changes.
    pub(crate) fn flip_in_place(&mut self, bit: usize) {
        debug_assert!(bit < self.n_bits);
        self.words[bit / 64] ^= 1u64 << (bit % 64);
    }

    /// Sets a bit to 1 while a pattern is being built up.
    pub(crate) fn set_bit(&mut self, bit: usize) {
        debug_assert!(bit < self.n_bits);
        self.words[bit / 64] |= 1u64 << (bit % 64);
    }

    /// Hamming distance to another pattern of the same length.
    pub fn hamming(&self, other: &Self) -> Result<usize> {
        if self.n_bits != other.n_bits {
            return Err(Error::PatternLength {
                expected: self.n_bits,
                got: other.n_bits,
            });
        }
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum())
    }

    /// Hex encoding: one digit per 4 bits, lowest-index bits first, bit 0 as
    /// the least-significant bit of the first digit, zero-padded to
    /// `ceil(n_bits / 4)` digits.
    pub fn to_hex(&self) -> String {
        let digits = self.n_bits.div_ceil(4);
        let mut out = String::with_capacity(digits);
        for d in 0..digits {
            let mut nibble = 0u8;
            for b in 0..4 {
                let bit = d * 4 + b;
                if bit < self.n_bits && self.get(bit) {
                    nibble |= 1 << b;
                }
            }
            out.push(char::from_digit(nibble as u32, 16).unwrap());
        }
        out
    }

    /// Inverse of [`ActivationPattern::to_hex`].
    pub fn from_hex(n_bits: usize, hex: &str) -> Result<Self> {
        let digits = n_bits.div_ceil(4);
        if hex.len() != digits {
            return Err(Error::Malformed(format!(
                "pattern hex has {} digits, expected {digits} for {n_bits} bits",
                hex.len()
            )));
        }
        let mut pattern = Self::zeroed(n_bits);
        for (d, c) in hex.chars().enumerate() {
            let nibble = c
                .to_digit(16)
                .ok_or_else(|| Error::Malformed(format!("invalid hex digit {c:?}")))?
                as u64;
            for b in 0..4 {
                let bit = d * 4 + b;
                if nibble >> b & 1 == 1 {
                    if bit >= n_bits {
                        return Err(Error::Malformed(format!(
                            "pattern hex sets bit {bit} beyond length {n_bits}"
                        )));
                    }
                    pattern.words[bit / 64] |= 1u64 << (bit % 64);
                }
            }
        }
        Ok(pattern)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zeroed_has_no_set_bits() {
        let p = ActivationPattern::zeroed(130);
        assert_eq!(p.len(), 130);
        assert_eq!(p.count_ones(), 0);
        assert!(!p.get(0));
        assert!(!p.get(129));
    }

    #[test]
    fn from_bits_round_trips() {
        let bits = [true, false, false, true, true];
        let p = ActivationPattern::from_bits(5, bits).unwrap();
        assert_eq!((0..5).map(|i| p.get(i)).collect::<Vec<_>>(), bits);
        assert_eq!(p.count_ones(), 3);
    }

    #[test]
    fn from_bits_length_mismatch_rejected() {
        assert!(ActivationPattern::from_bits(4, [true; 5]).is_err());
        assert!(ActivationPattern::from_bits(4, [true; 3]).is_err());
    }

    #[test]
    fn flip_changes_exactly_one_bit() {
        let p = ActivationPattern::zeroed(70);
        let q = p.flipped(69);
        assert_eq!(p.hamming(&q).unwrap(), 1);
        assert!(q.get(69));
        assert_eq!(q.flipped(69), p);
    }

    #[test]
    fn hamming_rejects_length_mismatch() {
        let p = ActivationPattern::zeroed(8);
        let q = ActivationPattern::zeroed(9);
        assert!(p.hamming(&q).is_err());
    }

    #[test]
    fn hex_layout_is_nibble_little_endian() {
        // bits 0..8 = 1,0,0,0,0,0,0,1 -> first digit 0x1, second 0x8
        let p = ActivationPattern::from_bits(
            8,
            [true, false, false, false, false, false, false, true],
        )
        .unwrap();
        assert_eq!(p.to_hex(), "18");
        // length not a multiple of 4 pads the final digit
        let q = ActivationPattern::from_bits(6, [false, false, false, false, true, false]).unwrap();
        assert_eq!(q.to_hex(), "01");
    }

    #[test]
    fn from_hex_rejects_bad_input() {
        assert!(ActivationPattern::from_hex(8, "1").is_err());
        assert!(ActivationPattern::from_hex(8, "zz").is_err());
        // bit 6 of digit "4" in position 1 would exceed 6 bits
        assert!(ActivationPattern::from_hex(6, "04").is_err());
    }

    proptest! {
        #[test]
        fn hex_round_trip(bits in proptest::collection::vec(any::<bool>(), 1..200)) {
            let n = bits.len();
            let p = ActivationPattern::from_bits(n, bits).unwrap();
            let hex = p.to_hex();
            prop_assert_eq!(hex.len(), n.div_ceil(4));
            let q = ActivationPattern::from_hex(n, &hex).unwrap();
            prop_assert_eq!(p, q);
        }

        #[test]
        fn flip_parity_alternates(n in 1usize..150, bit in 0usize..150) {
            prop_assume!(bit < n);
            let p = ActivationPattern::zeroed(n);
            let q = p.flipped(bit);
            prop_assert_ne!(p.parity(), q.parity());
        }
    }
}
