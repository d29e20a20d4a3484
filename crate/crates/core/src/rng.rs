//! Counter-based random streams.
//!
//! A stream is addressed by `(seed, stream_id)`. The seed keys a ChaCha8
//! generator and the stream id selects one of its 2^64 independent
//! keystreams, so streams can be handed out per run, arm or batch without
//! any coordination between workers.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        Self { seed, stream_id, inner }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Child stream under the same seed, addressed by `tag`.
    ///
    /// The child id is a bijective mix of `(stream_id, tag)` for a fixed
    /// parent, so distinct tags never collide with each other.
    pub fn substream(&self, tag: u64) -> RngStream {
        RngStream::new(self.seed, mix(self.stream_id) ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15))
    }

    /// Uniform draw in the open interval (0, 1).
    pub fn open01(&mut self) -> f64 {
        open01(self.inner.next_u64())
    }
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

/// Maps 52 high bits of `bits` to the open interval (0, 1).
pub fn open01(bits: u64) -> f64 {
    ((bits >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

// splitmix64 finalizer
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
