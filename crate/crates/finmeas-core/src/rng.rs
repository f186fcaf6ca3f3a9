use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Address of a reproducible random stream: a root seed plus a stream index.
///
/// ChaCha streams with the same seed and different indices are statistically
/// independent, so ensemble members can be generated in any order (or in
/// parallel) and still be bit-reproducible one by one.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    pub fn with_stream(self, stream: u64) -> Self {
        Self { stream, ..self }
    }

    /// Instantiate the generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut g = ChaCha8Rng::seed_from_u64(self.seed);
        g.set_stream(self.stream);
        g
    }
}
