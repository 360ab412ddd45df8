//! Seed handling. Every consumer of randomness owns its own ChaCha stream so
//! that, e.g., the channel sequence does not depend on what the policy samples.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng as SimRng;

/// Named substreams derived from one experiment seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Environment = 1,
    Policy = 2,
    Init = 3,
    Shuffle = 4,
    Replay = 5,
}

/// Deterministic generator for `(seed, stream)`.
pub fn substream(seed: u64, stream: Stream) -> SimRng {
    let mut rng = SimRng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}
