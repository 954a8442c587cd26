use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent sub-streams handed out by [`SeededRng`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    PowerIteration = 1,
    Pca = 2,
    Augment = 3,
    EncoderInit = 4,
    KMeans = 5,
    Synthetic = 6,
}

/// Seed holder for ChaCha8 streams.
///
/// Each consumer asks for its own [`Stream`]; the same seed and stream always
/// yield the same sequence, and streams never overlap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeededRng {
    seed: u64,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self, stream: Stream) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream as u64);
        rng
    }

    /// A stream for repeated use of one consumer, e.g. the i-th k-means restart.
    pub fn indexed_stream(&self, stream: Stream, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        rng.set_stream(stream as u64);
        rng
    }
}
