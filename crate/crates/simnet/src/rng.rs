//! Seeded randomness. Every run draws from a ChaCha8 stream chosen by
//! `(master seed, stream index)`, so trials are independent of execution order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// The generator for trial `stream` under `seed`.
pub fn substream(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
