//! Keyed pseudorandom function used to draw secrets and PRF-family output
//! functions.
//!
//! Construction: a chain of SplitMix64 finalizers over
//! `seed, domain, level, word_1, ..., word_m`, each absorbed as
//! `h = mix(h.wrapping_add(GAMMA) ^ word)`. Only wrapping 64-bit integer
//! arithmetic is involved, so outputs are identical on every platform.
//! Not cryptographic.

const GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

pub(crate) const DOMAIN_SECRET: u64 = 1;
pub(crate) const DOMAIN_G_ANCHOR: u64 = 2;
pub(crate) const DOMAIN_G_MASK: u64 = 3;
pub(crate) const DOMAIN_G_BIT: u64 = 4;

pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Prf {
    seed: u64,
}

impl Prf {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn hash(&self, domain: u64, level: usize, words: &[u64]) -> u64 {
        let mut h = mix64(self.seed ^ GAMMA);
        for &w in [domain, level as u64].iter().chain(words) {
            h = Self::extend(h, w);
        }
        h
    }

    /// Absorbs one more word: `hash(d, l, ws) = extend(hash(d, l, ws'), w)`
    /// where `ws = ws' ++ [w]`.
    pub fn extend(h: u64, w: u64) -> u64 {
        mix64(h.wrapping_add(GAMMA) ^ w)
    }
}
