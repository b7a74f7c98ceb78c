//! Counter-based seed derivation.
//!
//! Every trial seed is a hash of the master seed and the trial's coordinates
//! (run, generation, individual, repeat, ...), so the order in which parallel
//! workers pick up trials never changes what they compute.

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, coords: &[u64]) -> u64 {
    coords.iter().fold(splitmix64(master), |acc, &c| {
        splitmix64(acc ^ splitmix64(c))
    })
}

/// Domain tags keeping different experiment kinds on disjoint seed paths.
pub mod tag {
    pub const OPTIMIZER: u64 = 0x0c3a;
    pub const EVOLUTION: u64 = 0xe701;
    pub const SWEEP: u64 = 0x5e3e;
    pub const VALIDATION: u64 = 0x7a1d;
    pub const SINGLE: u64 = 0x0001;
}
