//! Reproducible, splittable random streams.
//!
//! Each stream is a ChaCha8 generator keyed by a 64-bit seed and positioned on
//! its own 64-bit stream id, so streams with distinct ids never overlap.
//! Parallel Monte Carlo assigns one stream id per replication, which keeps
//! results independent of the number of worker threads.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// A fresh stream on the same seed with a different id.
    pub fn fork(&self, stream_id: u64) -> Self {
        Self::new(self.seed, stream_id)
    }
}

/// Packs a (purpose, outer index, replication) triple into one stream id.
pub fn stream_id(purpose: u8, outer: u32, replication: u32) -> u64 {
    (u64::from(purpose) << 56) | (u64::from(outer) << 32) | u64::from(replication)
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
