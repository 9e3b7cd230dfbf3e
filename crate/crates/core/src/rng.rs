//! Deterministic random substreams.
//!
//! Every random draw in a bootstrap run comes from a stream addressed by
//! `(seed, j, i)`: `j` is the bootstrap iteration and `i` the observation
//! index, with `i = n` reserved for iteration-level draws (atom subsampling,
//! restart candidates). The stream is a ChaCha8 generator whose 256-bit key
//! is the SplitMix64 expansion of `seed` and whose 64-bit stream id is the
//! packed word `(j << 32) | i`. Distinct `(j, i)` pairs therefore select
//! disjoint keystreams of the same cipher, and the result never depends on
//! the order in which streams are created or consumed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random stream owned by a single worker.
pub type Substream = ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// One SplitMix64 output step.
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN_GAMMA);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn key_for_seed(seed: u64) -> [u8; 32] {
    let mut state = seed;
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    key
}

/// Stream id for `(j, i)`. Both indices must fit in 32 bits.
pub fn stream_id(j: u64, i: u64) -> u64 {
    assert!(
        j <= u32::MAX as u64 && i <= u32::MAX as u64,
        "substream indices must fit in 32 bits (j = {j}, i = {i})"
    );
    (j << 32) | i
}

/// Returns the substream for `(seed, j, i)`.
pub fn derive_substream(seed: u64, j: u64, i: u64) -> Substream {
    let mut rng = ChaCha8Rng::from_seed(key_for_seed(seed));
    rng.set_stream(stream_id(j, i));
    rng
}

/// Seed for an independent family of streams, e.g. data simulation, so it
/// never shares keystreams with a bootstrap run under the same user seed.
pub fn domain_seed(seed: u64, domain: u64) -> u64 {
    let mut state = seed ^ domain.rotate_left(17);
    splitmix64(&mut state) ^ domain
}
