//! Seeded random stream derivation.
//!
//! Reproducibility across runs, thread counts, and platforms requires a fixed
//! generator (ChaCha12, pinned here rather than the version-dependent
//! `StdRng`) and a way to derive independent substreams from a base seed.
//! Substreams are keyed by integer tags (episode index, round, role, ...) and
//! mixed with SplitMix64 so that nearby tags land far apart in seed space.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// The crate-wide deterministic generator.
pub type SeedStream = ChaCha12Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a base seed with a list of tags into a single substream seed.
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    let mut state = splitmix64(base ^ 0x6a09_e667_f3bc_c908);
    for &t in tags {
        state = splitmix64(state ^ splitmix64(t));
    }
    state
}

/// A fresh generator for the substream identified by `tags` under `base`.
pub fn substream(base: u64, tags: &[u64]) -> SeedStream {
    SeedStream::seed_from_u64(derive_seed(base, tags))
}
