//! Deterministic random streams.
//!
//! Every unit of parallel work draws from its own ChaCha stream, keyed by the
//! master seed and a task id, so results do not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Independent stream `task` under `master`.
pub fn stream(master: u64, task: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(task);
    rng
}

/// Task id for replicate `rep` of experiment setting `setting`.
pub fn setting_task(setting: u32, rep: u32) -> u64 {
    (u64::from(setting) << 32) | u64::from(rep)
}
