//! Seeded random streams.
//!
//! A single master seed determines every stochastic choice in a run. Each
//! component draws from its own stream, derived from the master seed and a
//! small integer path (e.g. `[POSTERIOR, model, year]`), so components never
//! share generator state and replicates can run in any order — or in
//! parallel — without changing results.

use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;

/// Stream tags for the top level of a derivation path. Values are arbitrary
/// but fixed: changing them changes every seeded result.
pub mod stream {
    pub const TRUTH: u64 = 1;
    pub const TRADERS: u64 = 2;
    pub const NETWORK: u64 = 3;
    pub const MARKET: u64 = 4;
    pub const POSTERIOR: u64 = 5;
    pub const PREDICTIVE: u64 = 6;
    pub const REVISION: u64 = 7;
    pub const SWEEP: u64 = 8;
    pub const DESIGN: u64 = 9;
    pub const BOOTSTRAP: u64 = 10;
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer; good avalanche for cheap seed mixing.
#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mix a master seed with a derivation path into a single 64-bit seed.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    let mut s = splitmix64(master);
    for &tag in path {
        s = splitmix64(s ^ tag.wrapping_mul(GOLDEN));
    }
    s
}

/// A fresh generator for the stream identified by `path` under `master`.
pub fn substream(master: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, path))
}
