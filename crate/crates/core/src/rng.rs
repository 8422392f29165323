//! Seeded random streams.
//!
//! Every run uses ChaCha20 seeded once from the user seed. Independent
//! sub-streams are selected with the ChaCha stream id, one fixed id per
//! purpose, so adding draws to one purpose never shifts another.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub type Rng = ChaCha20Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Data = 1,
    Init = 2,
    Eval = 3,
    Probe = 4,
    Embedding = 5,
}

pub fn stream(seed: u64, which: Stream) -> Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: u64 = stream(9, Stream::Data).random();
        let b: u64 = stream(9, Stream::Data).random();
        let c: u64 = stream(9, Stream::Init).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
