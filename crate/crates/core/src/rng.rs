//! Counter-based random substreams.
//!
//! Every Monte-Carlo path draws from its own ChaCha8 stream. The 256-bit key
//! is derived from `(seed, scheme tag)` and the ChaCha stream id is the path
//! index, so path `i` sees the same numbers whatever thread runs it and
//! whatever order paths are scheduled in.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Scheme tags keep the engines' streams disjoint for the same seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamTag {
    Ssa,
    TamedEm,
    Reciprocal,
    SquaredBessel,
    AppendixD,
    /// Shared Brownian increments for common-random-number comparisons.
    SharedNoise,
    Custom(u64),
}

impl StreamTag {
    fn code(self) -> u64 {
        match self {
            StreamTag::Ssa => 0x5353_4100,
            StreamTag::TamedEm => 0x5445_4d00,
            StreamTag::Reciprocal => 0x5245_4300,
            StreamTag::SquaredBessel => 0x5351_4200,
            StreamTag::AppendixD => 0x4150_4400,
            StreamTag::SharedNoise => 0x5348_5200,
            StreamTag::Custom(c) => c.rotate_left(17) ^ 0xC0FF_EE00,
        }
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Returns the generator for path `path` of the run keyed by `(seed, tag)`.
pub fn path_rng(seed: u64, tag: StreamTag, path: u64) -> ChaCha8Rng {
    let mut state = seed ^ tag.code().wrapping_mul(0xD6E8_FEB8_6659_FD93);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(path);
    rng
}
