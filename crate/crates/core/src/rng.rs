//! Per-trial random streams.
//!
//! Every Monte Carlo trial owns one [`RngStream`] derived from a root seed and
//! the trial index. The generator is ChaCha12 keyed by the root seed with the
//! trial index as its 64-bit stream id, so streams never overlap and results
//! do not depend on how trials are scheduled across threads.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    index: u64,
    rng: ChaCha12Rng,
}

/// The stream for trial `trial_index` under root `seed`.
pub fn derive_stream(seed: u64, trial_index: u64) -> RngStream {
    RngStream::new(seed, trial_index)
}

impl RngStream {
    pub fn new(seed: u64, index: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(index);
        Self { seed, index, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    /// A child stream keyed by this stream's next output and `tag`; used when
    /// one trial needs an independent sub-stream (e.g. bag sampling).
    pub fn fork(&mut self, tag: u64) -> RngStream {
        let child_seed = self.rng.next_u64();
        RngStream::new(child_seed, tag)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}
