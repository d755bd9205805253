//! Deterministic character n-gram feature-hashing embedder.
//!
//! The scheme, fully specified so a vector can be recomputed by hand:
//!
//! 1. collect all character 2-grams and 3-grams of the text (as substrings
//!    over Unicode scalar values);
//! 2. for each n-gram, hash its UTF-8 bytes with FNV-1a 64
//!    (offset basis `0xcbf29ce484222325`, prime `0x100000001b3`);
//! 3. add `+1` or `-1` at index `hash % dim`, the sign taken from the
//!    hash's top bit (`1` bit means `-1`);
//! 4. L2-normalize.
//!
//! A text shorter than two characters has no n-grams; it maps to the first
//! basis vector so the unit-norm contract still holds.

use crate::error::Result;

use super::EmbedderBackend;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

#[derive(Debug, Clone)]
pub struct HashingEmbedder {
    dim: usize,
}

impl HashingEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        HashingEmbedder { dim }
    }
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        HashingEmbedder::new(256)
    }
}

pub(crate) fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = FNV_OFFSET;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

impl HashingEmbedder {
    fn embed_one(&self, text: &str) -> Vec<f64> {
        let chars: Vec<char> = text.chars().collect();
        let mut vector = vec![0.0f64; self.dim];
        let mut any = false;
        let mut buf = String::new();
        for n in [2usize, 3] {
            if chars.len() < n {
                continue;
            }
            for window in chars.windows(n) {
                buf.clear();
                buf.extend(window.iter());
                let hash = fnv1a64(buf.as_bytes());
                let index = (hash % self.dim as u64) as usize;
                let sign = if hash & (1 << 63) != 0 { -1.0 } else { 1.0 };
                vector[index] += sign;
                any = true;
            }
        }
        if !any {
            vector[0] = 1.0;
        }
        vector
    }
}

impl EmbedderBackend for HashingEmbedder {
    fn embed_raw(&self, texts: &[String]) -> Result<Vec<Vec<f64>>> {
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn fingerprint(&self) -> String {
        format!("hash-ngram:fnv1a64:dim={}", self.dim)
    }
}
