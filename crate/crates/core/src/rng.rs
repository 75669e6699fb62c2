//! Seed splitting. Every random draw in a run descends from one root seed;
//! each consumer gets its own ChaCha stream so adding draws to one consumer
//! never perturbs another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Named random streams derived from a root seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    /// Parameter initialization.
    Init = 1,
    /// Per-epoch minibatch shuffling.
    Shuffle = 2,
    /// Event-drop corruption.
    Corruption = 3,
    /// Synthetic data generation and dataset splits.
    Data = 4,
    /// Diagnostic probes (perturbation directions, curvature probes).
    Probe = 5,
}

pub fn stream_rng(root: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(root);
    rng.set_stream(stream as u64);
    rng
}

/// Generator seeded directly from `seed` on the default stream.
pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
