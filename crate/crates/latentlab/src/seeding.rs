//! Deterministic sub-seed derivation.
//!
//! Every random draw in the crate comes from a ChaCha stream seeded through
//! this module, so results are identical across platforms, runs, and thread
//! counts. Parallel work never shares a stream: each unit of work derives its
//! own seed from the master seed, a domain label, and its index.

/// Derive a sub-seed from a master seed, a domain label, and an index.
pub fn subseed(master: u64, domain: &str, index: u64) -> u64 {
    // FNV-1a over the label keeps distinct domains apart...
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in domain.as_bytes() {
        h ^= u64::from(*byte);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    // ...and splitmix64 finishes the avalanche over all three inputs.
    let mut x = master
        .wrapping_add(h)
        .wrapping_add(index.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}
