//! Reproducible per-member random streams.
//!
//! Every stream is a ChaCha8 keystream keyed by the master seed and selected by
//! a 64-bit stream id. Distinct stream ids address disjoint keystreams, so
//! members never share increments no matter how evaluations are scheduled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Identifies one reproducible random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub master_seed: u64,
    pub stream_id: u64,
}

/// Purpose tags occupy the top byte of a derived stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum StreamPurpose {
    Generic = 0,
    Forward = 1,
    Perturbation = 2,
    Prior = 3,
    Truth = 4,
    Validation = 5,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        Self {
            master_seed,
            stream_id,
        }
    }

    /// Stream for `(purpose, generation, member)`.
    ///
    /// Layout of the id: 8 bits purpose, 24 bits generation, 32 bits member.
    pub fn derived(master_seed: u64, purpose: StreamPurpose, generation: u32, member: u32) -> Self {
        debug_assert!(generation < (1 << 24));
        let id = ((purpose as u64) << 56) | ((generation as u64 & 0xff_ffff) << 32) | member as u64;
        Self::new(master_seed, id)
    }

    /// Fresh generator positioned at the start of this stream.
    pub fn generator(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// `count` i.i.d. standard normal draws from the start of `stream`.
pub fn gaussian_increments(stream: RngStream, count: usize) -> Vec<f64> {
    let mut rng = stream.generator();
    (0..count).map(|_| rng.sample(StandardNormal)).collect()
}

/// Fill `out` with standard normal draws from an already-running generator.
#[inline]
pub fn fill_standard_normal<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    for v in out.iter_mut() {
        *v = rng.sample(StandardNormal);
    }
}
