//! Fixed hashing used to derive deterministic seeds.
//!
//! `mix64` is the SplitMix64 finalizer:
//!
//! ```text
//! z = x + 0x9E3779B97F4A7C15
//! z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//! z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//! z ^ (z >> 31)
//! ```
//!
//! with wrapping arithmetic. Outputs are part of the file formats (perturbed
//! corpora are reproducible from their seeds), so this must never change.

pub fn mix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// 64-bit FNV-1a over UTF-8 bytes.
pub fn fnv1a(text: &str) -> u64 {
    text.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

/// Seed for a per-item stream derived from a run seed and a string key.
pub fn derive(seed: u64, key: &str) -> u64 {
    mix64(seed ^ mix64(fnv1a(key)))
}
