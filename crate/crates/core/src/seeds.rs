//! Deterministic sub-seed derivation.

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable seed for a named purpose under a master seed.
pub fn derive(master: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(mix(master), |acc, &p| mix(acc ^ mix(p)))
}

pub mod tag {
    pub const GATE: u64 = 1;
    pub const INIT_LEARNER: u64 = 2;
    pub const LEARNER: u64 = 3;
    pub const PERTURB: u64 = 4;
    pub const DISTANCE: u64 = 5;
    pub const CLEAN_SPLIT: u64 = 6;
    pub const GENERATOR: u64 = 7;
    pub const BASELINE: u64 = 8;
}
