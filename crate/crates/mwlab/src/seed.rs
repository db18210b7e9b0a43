//! Deterministic seed derivation.
//!
//! Every random stream in the crate is keyed by a (master seed, purpose tag,
//! index) triple run through SplitMix64, so independent stages and parallel
//! workers never share or reorder randomness.

/// Purpose tags for derived streams. Values are arbitrary but frozen:
/// changing them changes every generated dataset.
pub mod tag {
    pub const FLUCTUATOR_RATES: u64 = 0x01;
    pub const FLUCTUATOR_TRAJECTORY: u64 = 0x02;
    pub const AMPLIFIER_NOISE: u64 = 0x03;
    pub const SWEEP_NOISE: u64 = 0x04;
    pub const STAIRCASE: u64 = 0x05;
    pub const EXPERIMENT_SWEEP: u64 = 0x10;
    pub const EXPERIMENT_STAIRCASE: u64 = 0x11;
    pub const EXPERIMENT_PSD: u64 = 0x12;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed from a master seed, a purpose tag and an index.
pub fn derive(master: u64, tag: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ tag) ^ index)
}
