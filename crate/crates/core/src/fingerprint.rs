//! Stable fingerprints of configuration values.

use serde::Serialize;
use sha2::{Digest, Sha256};

/// First 8 bytes (big-endian) of the SHA-256 of the value's JSON encoding.
pub fn config_hash<T: Serialize + ?Sized>(value: &T) -> u64 {
    let json = serde_json::to_vec(value).expect("configuration values serialize to JSON");
    let digest = Sha256::digest(&json);
    u64::from_be_bytes(digest[..8].try_into().expect("sha256 digest has 32 bytes"))
}

pub fn hex(hash: u64) -> String {
    format!("{hash:016x}")
}
