//! 1's-complement weight codes as stored column-major in the bit-cell array.
//!
//! A code of width `B` holds bits `b_{B-1} .. b_0`; the MSB is the sign. Positive
//! weights use natural binary, negative weights the bitwise complement of their
//! magnitude. The all-ones pattern is negative zero: it decodes to 0 but is never
//! produced by [`encode_weight`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Widest code supported by the codec.
pub const MAX_WIDTH: u8 = 8;

#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WeightCode {
    bits: u8,
    width: u8,
}

impl WeightCode {
    pub fn from_bits(bits: u8, width: u8) -> Result<Self> {
        if width == 0 || width > MAX_WIDTH || (width < 8 && bits >> width != 0) {
            return Err(Error::InvalidCode {
                bits: bits as u16,
                width,
            });
        }
        Ok(Self { bits, width })
    }

    pub fn zero(width: u8) -> Self {
        Self { bits: 0, width }
    }

    pub fn bits(self) -> u8 {
        self.bits
    }

    pub fn width(self) -> u8 {
        self.width
    }

    /// Bit `i`, LSB = 0.
    pub fn bit(self, i: u8) -> bool {
        debug_assert!(i < self.width);
        (self.bits >> i) & 1 == 1
    }

    /// Unsigned value `Σ 2^i b_i`.
    pub fn unsigned(self) -> u32 {
        self.bits as u32
    }

    pub fn is_negative(self) -> bool {
        self.bit(self.width - 1)
    }

    fn mask(self) -> u8 {
        if self.width == 8 {
            0xff
        } else {
            (1u8 << self.width) - 1
        }
    }

    /// All `2^width` codes in ascending unsigned order.
    pub fn all(width: u8) -> impl Iterator<Item = WeightCode> {
        let n = 1u16 << width;
        (0..n).map(move |b| WeightCode {
            bits: b as u8,
            width,
        })
    }
}

impl fmt::Debug for WeightCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "WeightCode({self})")
    }
}

impl fmt::Display for WeightCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in (0..self.width).rev() {
            f.write_str(if self.bit(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for WeightCode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let width = s.len();
        if width == 0 || width > MAX_WIDTH as usize {
            return Err(Error::InvalidCode {
                bits: 0,
                width: width.min(u8::MAX as usize) as u8,
            });
        }
        let mut bits = 0u8;
        for ch in s.chars() {
            bits = (bits << 1)
                | match ch {
                    '0' => 0,
                    '1' => 1,
                    _ => {
                        return Err(Error::InvalidCode {
                            bits: 0,
                            width: width as u8,
                        })
                    }
                };
        }
        WeightCode::from_bits(bits, width as u8)
    }
}

/// Largest representable magnitude, `2^(width-1) - 1`.
pub fn max_magnitude(width: u8) -> i32 {
    (1i32 << (width - 1)) - 1
}

pub fn encode_weight(v: i32, width: u8) -> Result<WeightCode> {
    if width == 0 || width > MAX_WIDTH {
        return Err(Error::InvalidCode { bits: 0, width });
    }
    let max = max_magnitude(width);
    if v.abs() > max {
        return Err(Error::WeightRange {
            value: v,
            min: -max,
            max,
        });
    }
    let magnitude = WeightCode {
        bits: v.unsigned_abs() as u8,
        width,
    };
    Ok(if v < 0 {
        ones_complement(magnitude)
    } else {
        magnitude
    })
}

pub fn decode_weight(c: WeightCode) -> i32 {
    if c.is_negative() {
        -(ones_complement(c).unsigned() as i32)
    } else {
        c.unsigned() as i32
    }
}

pub fn ones_complement(c: WeightCode) -> WeightCode {
    WeightCode {
        bits: !c.bits & c.mask(),
        width: c.width,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn code(s: &str) -> WeightCode {
        s.parse().unwrap()
    }

    #[test]
    fn encode_examples() {
        assert_eq!(encode_weight(5, 4).unwrap(), code("0101"));
        assert_eq!(encode_weight(-5, 4).unwrap(), code("1010"));
        assert_eq!(encode_weight(0, 4).unwrap(), code("0000"));
    }

    #[test]
    fn decode_examples() {
        assert_eq!(decode_weight(code("0111")), 7);
        assert_eq!(decode_weight(code("1100")), -3);
        assert_eq!(decode_weight(code("1111")), 0);
    }

    #[test]
    fn complement_examples() {
        assert_eq!(ones_complement(code("0101")), code("1010"));
        assert_eq!(ones_complement(code("0000")), code("1111"));
        assert_eq!(ones_complement(code("0111")), code("1000"));
    }

    #[test]
    fn out_of_range_names_interval() {
        let err = encode_weight(8, 4).unwrap_err();
        assert!(matches!(
            err,
            Error::WeightRange {
                value: 8,
                min: -7,
                max: 7
            }
        ));
        assert!(err.to_string().contains("[-7, 7]"));
        assert!(encode_weight(-8, 4).is_err());
    }

    #[test]
    fn exactly_two_codes_decode_to_zero() {
        let decoded: Vec<i32> = WeightCode::all(4).map(decode_weight).collect();
        assert_eq!(decoded.iter().filter(|&&v| v == 0).count(), 2);
        let mut nonzero: Vec<i32> = decoded.into_iter().filter(|&v| v != 0).collect();
        nonzero.sort_unstable();
        nonzero.dedup();
        assert_eq!(nonzero.len(), 14);
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!("01a1".parse::<WeightCode>().is_err());
        assert!("".parse::<WeightCode>().is_err());
        assert!(WeightCode::from_bits(0b10000, 4).is_err());
    }

    #[test]
    fn display_is_msb_first() {
        assert_eq!(encode_weight(1, 4).unwrap().to_string(), "0001");
        assert_eq!(encode_weight(-1, 4).unwrap().to_string(), "1110");
    }

    proptest! {
        #[test]
        fn round_trip(width in 1u8..=8, raw in any::<i32>()) {
            let max = max_magnitude(width);
            let v = if max == 0 { 0 } else { raw.rem_euclid(2 * max + 1) - max };
            prop_assert_eq!(decode_weight(encode_weight(v, width).unwrap()), v);
        }

        #[test]
        fn complement_sums_to_all_ones(width in 1u8..=8, bits in any::<u8>()) {
            let bits = if width == 8 { bits } else { bits & ((1u8 << width) - 1) };
            let c = WeightCode::from_bits(bits, width).unwrap();
            let all_ones = (1u32 << width) - 1;
            prop_assert_eq!(c.unsigned() + ones_complement(c).unsigned(), all_ones);
            prop_assert_eq!(ones_complement(ones_complement(c)), c);
        }
    }
}
