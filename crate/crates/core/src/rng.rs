//! Deterministic random streams.
//!
//! A master seed is split into independent streams by hashing
//! `(master, stream, index)` with splitmix64. Each replication of a Monte
//! Carlo estimator gets its own generator, so results do not depend on how
//! replications are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Generator used by every simulator in the crate.
pub type SimRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for replication `index` of stream `stream` under `master`.
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ stream) ^ index)
}

pub fn rng_for(master: u64, stream: u64, index: u64) -> SimRng {
    SimRng::seed_from_u64(derive_seed(master, stream, index))
}

/// Runs `reps` independent replications in parallel and returns their outputs
/// in replication order.
pub fn replicate<T, F>(reps: usize, master: u64, stream: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut SimRng) -> T + Sync,
{
    (0..reps as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(master, stream, i);
            f(&mut rng)
        })
        .collect()
}
