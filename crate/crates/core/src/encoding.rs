use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Largest state register this crate reasons about.
pub const MAX_WIDTH: usize = 32;

/// Bit vector of a state code. Index 0 is the most significant bit.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Encoding {
    bits: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EncodingError {
    #[error("encoding width must be between 1 and {MAX_WIDTH}, got {0}")]
    Width(usize),
    #[error("invalid binary digit {0:?}")]
    Digit(char),
    #[error("value {value} does not fit in {width} bits")]
    Overflow { value: u64, width: usize },
}

impl Encoding {
    pub fn from_bits(bits: Vec<bool>) -> Result<Self, EncodingError> {
        if bits.is_empty() || bits.len() > MAX_WIDTH {
            return Err(EncodingError::Width(bits.len()));
        }
        Ok(Encoding { bits })
    }

    pub fn from_value(value: u64, width: usize) -> Result<Self, EncodingError> {
        if width == 0 || width > MAX_WIDTH {
            return Err(EncodingError::Width(width));
        }
        if value >> width != 0 {
            return Err(EncodingError::Overflow { value, width });
        }
        let bits = (0..width)
            .map(|i| (value >> (width - 1 - i)) & 1 == 1)
            .collect();
        Ok(Encoding { bits })
    }

    pub fn width(&self) -> usize {
        self.bits.len()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn bit(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn value(&self) -> u64 {
        self.bits
            .iter()
            .fold(0u64, |acc, &b| (acc << 1) | u64::from(b))
    }

    pub fn all_ones(width: usize) -> Result<Self, EncodingError> {
        Encoding::from_bits(vec![true; width])
    }

    /// Verilog sized binary literal, e.g. `3'b010`.
    pub fn to_verilog(&self) -> String {
        format!("{}'b{}", self.width(), self)
    }
}

impl fmt::Display for Encoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for Encoding {
    type Err = EncodingError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bits = s
            .chars()
            .filter(|&c| c != '_')
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(EncodingError::Digit(other)),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Encoding::from_bits(bits)
    }
}

impl Serialize for Encoding {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Encoding {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn msb_first() {
        let e: Encoding = "100".parse().unwrap();
        assert!(e.bit(0));
        assert_eq!(e.value(), 4);
        assert_eq!(Encoding::from_value(4, 3).unwrap(), e);
        assert_eq!(e.to_verilog(), "3'b100");
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!("01x".parse::<Encoding>(), Err(EncodingError::Digit('x')));
        assert_eq!("".parse::<Encoding>(), Err(EncodingError::Width(0)));
        assert!(Encoding::from_value(8, 3).is_err());
    }
}
