//! Seeded random streams.
//!
//! Every stochastic routine draws from ChaCha20 keyed by a `u64` seed, with
//! the ChaCha stream id separating independent consumers. ChaCha is
//! counter-based and its output is fixed by the algorithm, so sampled sets
//! are bit-reproducible across platforms.

use rand::distributions::{Distribution, Open01};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Identifier recorded alongside sampled artifacts.
pub const RNG_ALGORITHM: &str = "chacha20/seed_from_u64";

pub type DetRng = ChaCha20Rng;

/// Generator for `seed` on stream `stream`.
pub fn seeded(seed: u64, stream: u64) -> DetRng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform draw on the open interval `(0, 1)`.
pub fn open01<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    Open01.sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let a: Vec<u64> = (0..4).map(|_| seeded(7, 1).gen()).collect();
        let b: Vec<u64> = (0..4).map(|_| seeded(7, 1).gen()).collect();
        assert_eq!(a, b);
        let mut x = seeded(7, 1);
        let mut y = seeded(7, 2);
        assert_ne!(x.gen::<u64>(), y.gen::<u64>());
    }
}
