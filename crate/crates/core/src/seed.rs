//! Deterministic seed derivation.
//!
//! Every random stream in the pipeline is derived from one user-facing seed plus
//! a key (tree index, feature index, grid cell name, ...), so results do not
//! depend on evaluation order or thread count.

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from `base` and a sequence of integer keys.
pub fn derive(base: u64, keys: &[u64]) -> u64 {
    keys.iter().fold(mix(base), |acc, &k| mix(acc ^ mix(k)))
}

/// Derive a child seed from `base` and a string key (FNV-1a hashed).
pub fn derive_str(base: u64, key: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in key.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    derive(base, &[h])
}
