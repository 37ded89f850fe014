//! Stateless seed derivation.
//!
//! Every random draw in a sweep comes from a ChaCha stream whose seed is a
//! pure function of `(master_seed, grid point, trial, purpose)`, so results do
//! not depend on how trials are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Sub-stream tags mixed into derived seeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Channel = 1,
    EstimationError = 2,
    RandomPhases = 3,
    InitialPhases = 4,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a parent seed and a list of counters.
pub fn split_seed(parent: u64, counters: &[u64]) -> u64 {
    counters.iter().fold(splitmix64(parent), |acc, &c| {
        splitmix64(acc ^ splitmix64(c))
    })
}

/// Seed for one `(grid point, trial)` work unit.
pub fn trial_seed(master: u64, point: u64, trial: u64) -> u64 {
    split_seed(master, &[point, trial])
}

/// Seed for a named sub-stream of a trial.
pub fn stream_seed(trial_seed: u64, stream: Stream) -> u64 {
    split_seed(trial_seed, &[stream as u64])
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
