//! Seeded random streams.
//!
//! Every random draw in the crate goes through [`stream`], so a run is fully
//! determined by its top-level seed and the stream labels used below.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const STREAM_SPLIT: u64 = 1;
pub const STREAM_INIT: u64 = 2;
pub const STREAM_SHUFFLE: u64 = 3;
pub const STREAM_SYNTH: u64 = 4;
pub const STREAM_FIXED: u64 = 5;
pub const STREAM_SAMPLE: u64 = 6;

pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Independent generator for item `index` of a fan-out, so results do not
/// depend on which worker handles which item.
pub fn item(seed: u64, stream_id: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(stream_id);
    rng
}
