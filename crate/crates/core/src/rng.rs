//! Seeded random streams. Every consumer gets its own ChaCha stream derived
//! from the experiment seed, so adding draws in one place never shifts
//! another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Init,
    Partition,
    Exchange,
    SyntheticCenters,
    SyntheticSamples,
    /// Mini-batch order for one agency (0 for centralized).
    Sampler(usize),
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Init => 1,
            Stream::Partition => 2,
            Stream::Exchange => 3,
            Stream::SyntheticCenters => 4,
            Stream::SyntheticSamples => 5,
            Stream::Sampler(agency) => 1_000 + agency as u64,
        }
    }
}

pub fn for_stream(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.id());
    rng
}
