//! Seed derivation for reproducible replications.
//!
//! Every random draw in a run comes from one master seed. A replication
//! never shares a stream with another replication or with another stage of
//! its own pipeline: the stream id of the ChaCha8 generator is
//!
//! ```text
//! stream = (replication << 8) | stage
//! ```
//!
//! keyed by `ChaCha8Rng::seed_from_u64(master)`. Replications can therefore
//! be run in any order, or in parallel, and reproduce bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Pipeline stage, used as the low byte of the stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Stage {
    Population = 0,
    Census = 1,
    PSample = 2,
    Matching = 3,
    Imputation = 4,
    Evaluation = 5,
    Demographic = 6,
    /// Free stream for tests and ad hoc tools.
    Scratch = 255,
}

pub fn stream(master_seed: u64, replication: u64, stage: Stage) -> SimRng {
    assert!(
        replication < (1u64 << 56),
        "replication index {replication} overflows the stream id"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream((replication << 8) | stage as u64);
    rng
}

/// Convenience for single-shot callers: replication 0, scratch stage.
pub fn seeded(seed: u64) -> SimRng {
    stream(seed, 0, Stage::Scratch)
}
