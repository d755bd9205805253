//! Content fingerprints for cache keys and run manifests.
//!
//! Every hash is SHA-256 over length-prefixed parts, so concatenation
//! ambiguity cannot make two different inputs collide structurally.

use sha2::{Digest, Sha256};

/// SHA-256 over length-prefixed byte parts, hex-encoded.
pub fn sha256_hex(parts: &[&[u8]]) -> String {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part);
    }
    to_hex(&hasher.finalize())
}

/// Short (16 hex char) form, used in cache file names.
pub fn short(full_hex: &str) -> &str {
    &full_hex[..16.min(full_hex.len())]
}

fn to_hex(bytes: &[u8]) -> String {
    let mut out = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn length_prefix_separates_parts() {
        // "ab" + "c" must differ from "a" + "bc"
        assert_ne!(sha256_hex(&[b"ab", b"c"]), sha256_hex(&[b"a", b"bc"]));
    }

    #[test]
    fn deterministic() {
        assert_eq!(sha256_hex(&[b"x", b"y"]), sha256_hex(&[b"x", b"y"]));
    }

    #[test]
    fn hex_is_lowercase_64_chars() {
        let h = sha256_hex(&[b"hello"]);
        assert_eq!(h.len(), 64);
        assert!(h.chars().all(|c| c.is_ascii_hexdigit() && !c.is_ascii_uppercase()));
    }
}
