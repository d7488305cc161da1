//! Seeded random sources. Every stochastic operation takes an explicit
//! generator so results are a pure function of `(inputs, seed)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives a child seed from a base seed and a path of indices
/// (stage, step, sample, ...). Uses the splitmix64 finalizer.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    let mut h = mix(base ^ 0x243f_6a88_85a3_08d3);
    for &p in path {
        h = mix(h ^ mix(p.wrapping_add(0x9e37_79b9_7f4a_7c15)));
    }
    h
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
