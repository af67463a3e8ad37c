//! Seed derivation for reproducible parallel Monte Carlo.
//!
//! Every path gets its own generator, seeded from `(master_seed, path_index)`
//! through [`derive_seed`]. Nothing about the result depends on which worker
//! ran the path or in what order, so estimates are bit-identical for any
//! worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `splitmix64(splitmix64(seed) ^ (index * GOLDEN_GAMMA))`.
#[inline]
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ index.wrapping_mul(GOLDEN_GAMMA))
}

/// Stream tags keep different estimators from sharing random numbers when
/// they are handed the same master seed.
pub mod stream {
    pub const PAIR_PATHS: u64 = 0x5041_4952;
    pub const RENEWAL_TAILS: u64 = 0x5441_494C;
    pub const GAMMA: u64 = 0x4741_4D4D;
    pub const TRIAL_STATS: u64 = 0x5452_4941;
}

/// Generator for chain `chain` (0 or 1) of path `path` under `seed`.
pub fn path_rng(seed: u64, path: u64, chain: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, path));
    rng.set_stream(chain);
    rng
}

/// Runs `f` on a dedicated pool of `workers` threads; `0` means rayon's
/// default sizing.
pub fn with_workers<R, F>(workers: usize, f: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .expect("failed to build worker pool");
    pool.install(f)
}
