//! Seed derivation.
//!
//! Every random stream is seeded by `derive(master, stream)`, where `stream`
//! identifies the consumer (a run index, an evaluation checkpoint, a data lane).
//! The function is SplitMix64's finaliser applied to the master seed mixed with
//! the finalised stream id, so distinct streams of one master are decorrelated
//! and the mapping is stable across platforms and releases.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for `stream` under `master`.
pub fn derive(master: u64, stream: u64) -> u64 {
    mix(master.wrapping_add(GOLDEN) ^ mix(stream.wrapping_add(GOLDEN.rotate_left(17))))
}

/// Child seed for a named stream; the name is hashed with 64-bit FNV-1a.
pub fn derive_named(master: u64, name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    derive(master, h)
}
