//! Deterministic per-record randomness.
//!
//! Every decoded record draws from its own stream seeded by a stable 64-bit
//! hash of `(global_seed, image_id, pair_index)`. Streams are independent of
//! scheduling, thread count, and platform, which is what makes pipeline
//! output byte-reproducible. The generator is splitmix64, fixed here so the
//! byte stream can never drift under dependency upgrades.

/// One splitmix64 scramble step.
pub const fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Stable hash of the record identity used to seed its stream.
pub const fn record_seed(global_seed: u64, image_id: i64, pair_index: u64) -> u64 {
    let mut h = splitmix64(global_seed);
    h = splitmix64(h ^ (image_id as u64));
    splitmix64(h ^ pair_index)
}

/// Minimal deterministic stream over splitmix64 output.
#[derive(Debug, Clone)]
pub struct Stream {
    state: u64,
}

impl Stream {
    pub const fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform draw in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform index in `[0, n)`. `n` must be nonzero.
    pub fn next_index(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }

    /// Uniform draw in `[-1, 1)`.
    pub fn next_signed(&mut self) -> f64 {
        self.next_f64() * 2.0 - 1.0
    }
}
