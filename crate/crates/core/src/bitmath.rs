//! GF(2) bitstrings and the Walsh–Hadamard spectrum of Boolean functions.
//!
//! Bits are numbered from 1. Bit 1 is the leftmost character of the textual
//! form and the most significant bit of the integer encoding, so `"100"` is
//! `one_hot(1, 3)` and encodes to 4.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub const MAX_BITS: usize = 64;

/// A fixed-length bitstring of at most 64 bits.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitString {
    value: u64,
    len: usize,
}

fn mask(len: usize) -> u64 {
    if len == 64 {
        u64::MAX
    } else {
        (1u64 << len) - 1
    }
}

impl BitString {
    pub fn new(len: usize, value: u64) -> Result<Self> {
        if len == 0 {
            return Err(Error::InvalidBitString("length must be positive".into()));
        }
        if len > MAX_BITS {
            return Err(Error::WidthTooLarge {
                width: len,
                max: MAX_BITS,
            });
        }
        if value & !mask(len) != 0 {
            return Err(Error::InvalidBitString(format!(
                "value {value} does not fit in {len} bits"
            )));
        }
        Ok(Self { value, len })
    }

    /// Panics if `len` is 0 or above 64.
    pub fn zeros(len: usize) -> Self {
        assert!((1..=MAX_BITS).contains(&len), "bad bitstring length {len}");
        Self { value: 0, len }
    }

    pub fn ones(len: usize) -> Self {
        assert!((1..=MAX_BITS).contains(&len), "bad bitstring length {len}");
        Self {
            value: mask(len),
            len,
        }
    }

    /// `1_j`: the length-`n` string with only bit `j` set.
    pub fn one_hot(j: usize, n: usize) -> Result<Self> {
        if j == 0 || j > n {
            return Err(Error::IndexOutOfRange { index: j, len: n });
        }
        let base = Self::new(n, 0)?;
        Ok(base.with_bit(j, true))
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Integer encoding with bit 1 as the most significant bit.
    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn index(&self) -> usize {
        self.value as usize
    }

    pub fn is_zero(&self) -> bool {
        self.value == 0
    }

    pub fn weight(&self) -> u32 {
        self.value.count_ones()
    }

    /// Bit `j` (1-based). Panics when `j` is out of range.
    pub fn bit(&self, j: usize) -> bool {
        assert!(
            j >= 1 && j <= self.len,
            "bit {j} out of range 1..={}",
            self.len
        );
        (self.value >> (self.len - j)) & 1 == 1
    }

    pub fn with_bit(mut self, j: usize, b: bool) -> Self {
        assert!(
            j >= 1 && j <= self.len,
            "bit {j} out of range 1..={}",
            self.len
        );
        let m = 1u64 << (self.len - j);
        if b {
            self.value |= m;
        } else {
            self.value &= !m;
        }
        self
    }

    pub fn dot(&self, other: &BitString) -> Result<bool> {
        self.check_len(other)?;
        Ok((self.value & other.value).count_ones() & 1 == 1)
    }

    pub fn xor(&self, other: &BitString) -> Result<BitString> {
        self.check_len(other)?;
        Ok(Self {
            value: self.value ^ other.value,
            len: self.len,
        })
    }

    fn check_len(&self, other: &BitString) -> Result<()> {
        if self.len != other.len {
            return Err(Error::LengthMismatch {
                expected: self.len,
                found: other.len,
            });
        }
        Ok(())
    }

    /// All `2^n` strings of length `n` in increasing integer order.
    pub fn all(n: usize) -> impl Iterator<Item = BitString> {
        assert!(
            (1..MAX_BITS).contains(&n),
            "cannot enumerate {n}-bit strings"
        );
        (0..(1u64 << n)).map(move |value| BitString { value, len: n })
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for j in 1..=self.len {
            f.write_str(if self.bit(j) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({self})")
    }
}

impl FromStr for BitString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.is_empty() {
            return Err(Error::InvalidBitString("empty string".into()));
        }
        if s.len() > MAX_BITS {
            return Err(Error::WidthTooLarge {
                width: s.len(),
                max: MAX_BITS,
            });
        }
        let mut value = 0u64;
        for c in s.chars() {
            value = (value << 1)
                | match c {
                    '0' => 0,
                    '1' => 1,
                    _ => return Err(Error::InvalidBitString(format!("`{s}`"))),
                };
        }
        Ok(Self {
            value,
            len: s.len(),
        })
    }
}

impl Serialize for BitString {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub fn dot(a: &BitString, b: &BitString) -> Result<bool> {
    a.dot(b)
}

pub fn xor(a: &BitString, b: &BitString) -> Result<BitString> {
    a.xor(b)
}

pub fn one_hot(j: usize, n: usize) -> Result<BitString> {
    BitString::one_hot(j, n)
}

/// Integer encoding of a sequence of bitstrings read left to right as one
/// long string.
pub fn encode_args(args: &[BitString]) -> u64 {
    args.iter()
        .fold(0u64, |acc, a| (acc << a.len()) | a.value())
}

/// Inverse of [`encode_args`] for the given widths.
pub fn decode_args(mut index: u64, widths: &[usize]) -> Vec<BitString> {
    let mut out = vec![BitString::zeros(1); widths.len()];
    for (slot, &w) in out.iter_mut().zip(widths).rev() {
        *slot = BitString {
            value: index & mask(w),
            len: w,
        };
        index >>= w;
    }
    out
}

/// Truth table of a Boolean function on `n` bits, indexed by the integer
/// encoding of the input.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TruthTable {
    n: usize,
    values: Vec<bool>,
}

pub const MAX_TABLE_BITS: usize = 26;

impl TruthTable {
    pub fn new(n: usize, values: Vec<bool>) -> Result<Self> {
        if n == 0 || n > MAX_TABLE_BITS {
            return Err(Error::WidthTooLarge {
                width: n,
                max: MAX_TABLE_BITS,
            });
        }
        if values.len() != 1usize << n {
            return Err(Error::MalformedTable {
                expected: 1 << n,
                found: values.len(),
            });
        }
        Ok(Self { n, values })
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(&BitString) -> bool) -> Result<Self> {
        if n == 0 || n > MAX_TABLE_BITS {
            return Err(Error::WidthTooLarge {
                width: n,
                max: MAX_TABLE_BITS,
            });
        }
        Ok(Self {
            n,
            values: BitString::all(n).map(|x| f(&x)).collect(),
        })
    }

    pub fn try_from_fn(n: usize, mut f: impl FnMut(&BitString) -> Result<bool>) -> Result<Self> {
        if n == 0 || n > MAX_TABLE_BITS {
            return Err(Error::WidthTooLarge {
                width: n,
                max: MAX_TABLE_BITS,
            });
        }
        let values = BitString::all(n).map(|x| f(&x)).collect::<Result<_>>()?;
        Ok(Self { n, values })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[bool] {
        &self.values
    }

    pub fn at(&self, index: usize) -> bool {
        self.values[index]
    }

    pub fn get(&self, x: &BitString) -> Result<bool> {
        if x.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                found: x.len(),
            });
        }
        Ok(self.values[x.index()])
    }

    pub fn flip(&mut self, index: usize) {
        self.values[index] = !self.values[index];
    }

    /// `true` when both output values occur.
    pub fn is_surjective(&self) -> bool {
        self.values.iter().any(|&v| v) && self.values.iter().any(|&v| !v)
    }

    /// The string `s` with `f(x) = s·x` for all `x`, if `f` is linear.
    pub fn linear_coefficients(&self) -> Option<BitString> {
        let spectrum = sign_spectrum(self);
        spectrum
            .values()
            .iter()
            .position(|&v| v == 1.0)
            .map(|i| BitString::new(self.n, i as u64).expect("index fits"))
    }

    /// Table as a string of '0'/'1' in index order.
    pub fn to_bit_string(&self) -> String {
        self.values
            .iter()
            .map(|&b| if b { '1' } else { '0' })
            .collect()
    }

    pub fn from_bit_string(s: &str) -> Result<Self> {
        let len = s.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::MalformedTable {
                expected: len.next_power_of_two().max(2),
                found: len,
            });
        }
        let values = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(Error::InvalidBitString(format!("table `{s}`"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(len.trailing_zeros() as usize, values)
    }
}

/// `ĝ(χ) = 2^-n Σ_x (-1)^(χ·x + f(x))`, one value per `χ` in index order.
#[derive(Clone, Debug, PartialEq)]
pub struct SignSpectrum {
    n: usize,
    values: Vec<f64>,
}

impl SignSpectrum {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, chi: &BitString) -> Result<f64> {
        if chi.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                found: chi.len(),
            });
        }
        Ok(self.values[chi.index()])
    }

    /// Fourier Sampling distribution `ĝ(χ)²`.
    pub fn probabilities(&self) -> Vec<f64> {
        self.values.iter().map(|v| v * v).collect()
    }

    pub fn parseval_sum(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    /// Exact Kronecker delta test.
    pub fn is_delta_at(&self, s: &BitString) -> bool {
        s.len() == self.n
            && self
                .values
                .iter()
                .enumerate()
                .all(|(i, &v)| v == if i == s.index() { 1.0 } else { 0.0 })
    }
}

pub fn sign_spectrum(f: &TruthTable) -> SignSpectrum {
    // Fast Walsh–Hadamard transform on integers, then one exact dyadic scale.
    let mut acc: Vec<i64> = f.values.iter().map(|&b| if b { -1 } else { 1 }).collect();
    let len = acc.len();
    let mut h = 1;
    while h < len {
        for block in acc.chunks_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (u, v) = (*a, *b);
                *a = u + v;
                *b = u - v;
            }
        }
        h *= 2;
    }
    let scale = (len as f64).recip();
    SignSpectrum {
        n: f.n,
        values: acc.into_iter().map(|v| v as f64 * scale).collect(),
    }
}
