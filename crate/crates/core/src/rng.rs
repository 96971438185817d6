//! Named, seeded random streams.
//!
//! Every source of randomness (bits, noise, init, PRT placement, ...) draws
//! from its own stream derived from `(seed, name)`, so adding draws to one
//! stream never perturbs another.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha12Rng;

pub fn stream(seed: u64, name: &str) -> StreamRng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(name.as_bytes());
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha12Rng::from_seed(key)
}

/// Sub-stream for worker or sweep point `index` of a named stream.
pub fn substream(seed: u64, name: &str, index: u64) -> StreamRng {
    stream(seed, &format!("{name}/{index}"))
}
