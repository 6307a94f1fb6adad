use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::SparseVec;
use crate::error::{Error, Result};

/// Token n-gram hashing into a fixed power-of-two number of buckets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HashFeaturizerConfig {
    pub dimension: usize,
    pub ngram_min: usize,
    pub ngram_max: usize,
    pub lowercase: bool,
    pub signed_hashing: bool,
}

impl Default for HashFeaturizerConfig {
    fn default() -> Self {
        Self { dimension: 1 << 12, ngram_min: 1, ngram_max: 2, lowercase: true, signed_hashing: true }
    }
}

impl HashFeaturizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.dimension.is_power_of_two() || !(1 << 8..=1 << 20).contains(&self.dimension) {
            return Err(Error::Config(format!(
                "hash dimension must be a power of two in [256, 1048576], got {}",
                self.dimension
            )));
        }
        if !(1 <= self.ngram_min && self.ngram_min <= self.ngram_max && self.ngram_max <= 3) {
            return Err(Error::Config(format!(
                "need 1 <= ngram_min <= ngram_max <= 3, got {}..{}",
                self.ngram_min, self.ngram_max
            )));
        }
        Ok(())
    }
}

/// Output of [`hash_features`]; `empty` is set when the text had no tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct HashedText {
    pub vector: SparseVec,
    pub empty: bool,
}

/// FNV-1a over the bytes followed by the MurmurHash3 `fmix64` finalizer.
///
/// FNV offset basis `0xcbf29ce484222325`, prime `0x100000001b3`; fmix64
/// constants `0xff51afd7ed558ccd` and `0xc4ceb9fe1a85ec53`.
pub fn hash64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h ^= h >> 33;
    h = h.wrapping_mul(0xff51_afd7_ed55_8ccd);
    h ^= h >> 33;
    h = h.wrapping_mul(0xc4ce_b9fe_1a85_ec53);
    h ^ (h >> 33)
}

/// Hashes whitespace tokens and their n-grams into an L2-normalized vector.
///
/// N-grams are the tokens joined by a single space. The bucket is the low
/// bits of [`hash64`]; with signed hashing the top bit selects the sign.
pub fn hash_features(text: &str, config: &HashFeaturizerConfig) -> Result<HashedText> {
    config.validate()?;
    let normalized = if config.lowercase { text.to_lowercase() } else { text.to_string() };
    let tokens: Vec<&str> = normalized.split_whitespace().collect();
    let mask = (config.dimension - 1) as u64;
    let mut buckets: BTreeMap<u32, f64> = BTreeMap::new();
    for n in config.ngram_min..=config.ngram_max {
        for gram in tokens.windows(n) {
            let h = hash64(gram.join(" ").as_bytes());
            let sign = if config.signed_hashing && h >> 63 == 1 { -1.0 } else { 1.0 };
            *buckets.entry((h & mask) as u32).or_insert(0.0) += sign;
        }
    }
    buckets.retain(|_, v| *v != 0.0);
    let norm = buckets.values().map(|v| v * v).sum::<f64>().sqrt();
    let (indices, values): (Vec<u32>, Vec<f64>) =
        buckets.into_iter().map(|(i, v)| (i, if norm > 0.0 { v / norm } else { v })).unzip();
    Ok(HashedText { vector: SparseVec::new(config.dimension, indices, values)?, empty: tokens.is_empty() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_normalized() {
        let cfg = HashFeaturizerConfig::default();
        let a = hash_features("Got food poisoning after lunch", &cfg).unwrap();
        let b = hash_features("Got food poisoning after lunch", &cfg).unwrap();
        assert_eq!(a, b);
        assert!((a.vector.norm() - 1.0).abs() < 1e-9);
        assert!(!a.empty);
    }

    #[test]
    fn word_order_matters_with_bigrams() {
        let cfg = HashFeaturizerConfig { ngram_max: 2, signed_hashing: false, ..Default::default() };
        let ab = hash_features("a b", &cfg).unwrap().vector;
        let ba = hash_features("b a", &cfg).unwrap().vector;
        assert_ne!(ab, ba);
        // the two bigrams land in different buckets
        let h1 = hash64(b"a b") & 4095;
        let h2 = hash64(b"b a") & 4095;
        assert_ne!(h1, h2);
        assert!(ab.indices().contains(&(h1 as u32)));
        assert!(ba.indices().contains(&(h2 as u32)));
    }

    #[test]
    fn empty_text_is_flagged() {
        let out = hash_features("   \t ", &HashFeaturizerConfig::default()).unwrap();
        assert!(out.empty);
        assert_eq!(out.vector.nnz(), 0);
    }

    #[test]
    fn lowercase_flag() {
        let on = HashFeaturizerConfig::default();
        let off = HashFeaturizerConfig { lowercase: false, ..Default::default() };
        assert_eq!(hash_features("Sick", &on).unwrap(), hash_features("sick", &on).unwrap());
        assert_ne!(hash_features("Sick", &off).unwrap(), hash_features("sick", &off).unwrap());
    }

    #[test]
    fn rejects_bad_config() {
        let bad = HashFeaturizerConfig { dimension: 1000, ..Default::default() };
        assert!(hash_features("x", &bad).is_err());
        let bad = HashFeaturizerConfig { ngram_min: 2, ngram_max: 1, ..Default::default() };
        assert!(hash_features("x", &bad).is_err());
    }

    #[test]
    fn fnv_reference_value() {
        // FNV-1a 64 of "a" is 0xaf63dc4c8601ec8c; fmix64 applied on top.
        let mut h: u64 = 0xaf63_dc4c_8601_ec8c;
        h ^= h >> 33;
        h = h.wrapping_mul(0xff51_afd7_ed55_8ccd);
        h ^= h >> 33;
        h = h.wrapping_mul(0xc4ce_b9fe_1a85_ec53);
        h ^= h >> 33;
        assert_eq!(hash64(b"a"), h);
    }
}
