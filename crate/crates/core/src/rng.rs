//! Seeded per-trial random streams.
//!
//! Every Monte Carlo trial draws from its own ChaCha stream selected by the
//! trial index, so results do not depend on the order (or thread) in which
//! trials run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}
