//! Counter-based seed derivation. Every random stream in an experiment is
//! `derive(master, [stream, a, b, ...])`, so a single training run can be
//! re-executed in isolation from its coordinates.

/// Stream tags keep seeds for different purposes apart.
pub mod stream {
    pub const FOLDS: u64 = 1;
    pub const TRAIN: u64 = 2;
    pub const SYNTH: u64 = 3;
    pub const GRID: u64 = 4;
}

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds `counters` into `master` one splitmix64 step at a time.
pub fn derive(master: u64, counters: &[u64]) -> u64 {
    counters
        .iter()
        .fold(splitmix64(master), |acc, c| splitmix64(acc ^ splitmix64(*c)))
}
