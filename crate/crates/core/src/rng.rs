//! Per-trial random streams.
//!
//! Every trial owns two ChaCha8 streams derived from the master seed: one
//! for plant noise and one for the reference signal. A trial's draws depend
//! only on `(master_seed, trial_index, stream)`, never on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Noise = 0,
    Reference = 1,
}

pub fn trial_rng(master_seed: u64, trial_index: usize, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial_index as u64 * 2 + stream as u64);
    rng
}
