//! Seeded, splittable random streams.
//!
//! Every randomized component of the library (probe checks, power iteration
//! starts, block samplers, Monte-Carlo replicates) draws from a counter-based
//! ChaCha stream addressed by `(seed, stream)`. Streams are independent and
//! order-free: drawing from stream `i` never changes what stream `j` yields,
//! so replicates and per-iteration samples are reproducible in any order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Returns the generator for `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derives an independent child seed, e.g. one per Monte-Carlo replicate.
///
/// splitmix64 finalizer; distinct `lane`s give decorrelated seeds.
pub fn derive_seed(seed: u64, lane: u64) -> u64 {
    let mut z = seed ^ lane.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Standard normal sample vector.
pub fn normal_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}
