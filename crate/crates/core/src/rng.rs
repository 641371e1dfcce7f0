//! Seeded random streams.
//!
//! Every random draw in a simulation comes from a stream derived from
//! `(seed, path)`, where the path names the trial, slot and purpose. Streams
//! for different paths are statistically independent, so trials can be run in
//! any order or in parallel and still reproduce bit-for-bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

/// What a stream is used for; the tag is the last element of a stream path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Purpose {
    Center = 1,
    TrackingFrame = 2,
    PpmSymbol = 3,
    Calibration = 4,
    TieBreak = 5,
    Optimizer = 6,
    Decision = 7,
    Sampling = 8,
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent stream from a seed and a path of indices.
pub fn substream(seed: u64, path: &[u64]) -> Stream {
    let mut state = mix(seed.wrapping_add(GOLDEN));
    for (i, &p) in path.iter().enumerate() {
        state = mix(state ^ mix(p.wrapping_add(GOLDEN.wrapping_mul(i as u64 + 2))));
    }
    let mut key = [0u8; 32];
    for chunk in key.chunks_mut(8) {
        state = state.wrapping_add(GOLDEN);
        chunk.copy_from_slice(&mix(state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Stream for `purpose` within trial `trial`, slot `slot`.
pub fn trial_stream(seed: u64, trial: u64, slot: u64, purpose: Purpose) -> Stream {
    substream(seed, &[trial, slot, purpose as u64])
}
