//! Seed derivation.
//!
//! Every random draw is taken from a substream keyed by a root seed and a short
//! path (purpose tag, iteration, particle index, ...). Substreams are independent
//! of scheduling, so serial and parallel execution give identical results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Purpose tags for the first path element of a substream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Prior = 1,
    Simulate = 2,
    Perturb = 3,
    Proposal = 4,
    Accept = 5,
    Resample = 6,
    Data = 7,
    Algorithm = 8,
    Truth = 9,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a root seed with a path into a new 64-bit seed.
pub fn derive_seed(root: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(root), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn substream(root: u64, tag: Stream, path: &[u64]) -> SimRng {
    let seed = derive_seed(derive_seed(root, &[tag as u64]), path);
    ChaCha8Rng::seed_from_u64(seed)
}
