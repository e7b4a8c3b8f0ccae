//! Seeded random streams. Every consumer derives an independent stream from
//! the user seed, a purpose tag and a sample index, so results do not depend
//! on the number of worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::pc::Family;

pub const PURPOSE_INIT: u64 = 1;
pub const PURPOSE_RESIDUAL: u64 = 2;
pub const PURPOSE_MC: u64 = 3;
pub const PURPOSE_SELF_MC: u64 = 4;

pub fn stream(seed: u64, purpose: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ purpose.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(index);
    rng
}

/// One germ sample, one family per dimension.
pub fn draw_germ<R: rand::Rng + ?Sized>(families: &[Family], rng: &mut R) -> Vec<f64> {
    families.iter().map(|f| f.sample(rng)).collect()
}
