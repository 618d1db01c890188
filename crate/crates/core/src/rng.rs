//! Reproducible, addressable random number streams.
//!
//! Every random quantity in the crate is keyed by `(master seed, stream id,
//! counter)`. The same key yields the same number no matter which worker
//! evaluates it or in which order, which is what makes ensemble results
//! independent of the thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use std::f64::consts::TAU;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn derive_key(seed: u64, stream: u64) -> [u8; 32] {
    let mut state = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    key
}

/// A ChaCha stream for bulk ordered sampling within one logical stream
/// (one path, one Monte-Carlo batch, ...).
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha12Rng {
    ChaCha12Rng::from_seed(derive_key(seed, stream))
}

/// Standard normal draw addressed by `(seed, stream, counter)`.
///
/// Uses the ChaCha word position as the counter, so draws can be made in any
/// order (or re-made) and always agree.
pub fn counter_gaussian(seed: u64, stream: u64, counter: u64) -> f64 {
    let mut rng = stream_rng(seed, stream);
    rng.set_word_pos((counter as u128) * 4);
    let u1: f64 = rng.gen();
    let u2: f64 = rng.gen();
    let u1 = if u1 > 0.0 { u1 } else { f64::MIN_POSITIVE };
    (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos()
}
