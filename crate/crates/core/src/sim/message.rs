use alloc::vec::Vec;

use crate::math::log2_ceil;

/// Maximum number of integer fields in one message.
pub const MAX_FIELDS: usize = 4;

/// Bits allowed per field in an `n`-node network: `⌈log₂ n⌉ + 8`.
pub fn field_bits(n: usize) -> u32 {
    log2_ceil(n) + 8
}

/// A small message: a tag plus up to [`MAX_FIELDS`] integer fields.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Message {
    tag: u8,
    len: u8,
    fields: [u64; MAX_FIELDS],
}

/// Why a message does not fit the payload budget.
#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
pub enum PayloadError {
    /// More than [`MAX_FIELDS`] fields.
    #[error("{0} fields exceed the limit of {MAX_FIELDS}")]
    TooManyFields(usize),
    /// A field needs more bits than allowed.
    #[error("field {index} needs {bits} bits, budget is {budget}")]
    FieldTooWide {
        /// Field position.
        index: usize,
        /// Bits needed.
        bits: u32,
        /// Bits allowed.
        budget: u32,
    },
}

impl Message {
    /// Builds a message. Panics if more than [`MAX_FIELDS`] fields are given; use
    /// [`Message::try_new`] to get an error instead.
    pub fn new(tag: u8, fields: &[u64]) -> Self {
        Message::try_new(tag, fields).expect("too many message fields")
    }

    /// Builds a message, rejecting more than [`MAX_FIELDS`] fields.
    pub fn try_new(tag: u8, fields: &[u64]) -> Result<Self, PayloadError> {
        if fields.len() > MAX_FIELDS {
            return Err(PayloadError::TooManyFields(fields.len()));
        }
        let mut f = [0u64; MAX_FIELDS];
        f[..fields.len()].copy_from_slice(fields);
        Ok(Message { tag, len: fields.len() as u8, fields: f })
    }

    /// The tag.
    pub fn tag(&self) -> u8 {
        self.tag
    }

    /// The fields.
    pub fn fields(&self) -> &[u64] {
        &self.fields[..self.len as usize]
    }

    /// Field `i`; panics if absent.
    pub fn field(&self, i: usize) -> u64 {
        self.fields()[i]
    }

    /// Size in words: one for the tag plus one per field.
    pub fn words(&self) -> usize {
        1 + self.len as usize
    }

    /// Checks every field against the per-field budget for an `n`-node network.
    pub fn check_budget(&self, n: usize) -> Result<(), PayloadError> {
        let budget = field_bits(n);
        for (index, &x) in self.fields().iter().enumerate() {
            let bits = u64::BITS - x.leading_zeros();
            if bits > budget {
                return Err(PayloadError::FieldTooWide { index, bits, budget });
            }
        }
        Ok(())
    }

    /// Splits a wide value into `parts` little-endian chunks of `field_bits(n)` bits each.
    pub fn split_wide(value: u64, n: usize, parts: usize) -> Vec<u64> {
        let b = field_bits(n);
        let mask = if b >= 64 { u64::MAX } else { (1u64 << b) - 1 };
        let mut out = Vec::with_capacity(parts);
        let mut v = value;
        for _ in 0..parts {
            out.push(v & mask);
            v = if b >= 64 { 0 } else { v >> b };
        }
        out
    }

    /// Inverse of [`Message::split_wide`].
    pub fn join_wide(chunks: &[u64], n: usize) -> u64 {
        let b = field_bits(n);
        chunks.iter().rev().fold(0u64, |acc, &c| (acc << b) | c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn budget() {
        let n = 64;
        assert_eq!(field_bits(n), 14);
        assert!(Message::new(0, &[(1 << 14) - 1]).check_budget(n).is_ok());
        assert_eq!(
            Message::new(0, &[1, 1 << 14]).check_budget(n),
            Err(PayloadError::FieldTooWide { index: 1, bits: 15, budget: 14 })
        );
        assert!(Message::try_new(0, &[1, 2, 3, 4, 5]).is_err());
    }

    #[test]
    fn wide_roundtrip() {
        let n = 64;
        let v = 200_000u64;
        let parts = Message::split_wide(v, n, 2);
        assert!(Message::new(0, &parts).check_budget(n).is_ok());
        assert_eq!(Message::join_wide(&parts, n), v);
    }
}
