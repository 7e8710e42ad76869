//! Seeded random substreams.
//!
//! Every random draw in the crate comes from a ChaCha8 generator keyed by a
//! seed and a [`Stream`] purpose, with the stream's `index` selecting one of
//! 2^64 independent ChaCha streams. Draws for one channel or one tree never
//! depend on how many draws another channel or tree consumed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Identifier of the generator family, recorded in configuration files and
/// reports so that results can be tied to the generator that produced them.
pub const GENERATOR_ID: &str = "chacha8-v1";

pub type StreamRng = ChaCha8Rng;

/// Purpose of a substream. The discriminants are part of the reproducibility
/// contract and must never be renumbered.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    /// Per-channel phases and offset coefficients of the sensor layout.
    Layout = 1,
    Gyro = 2,
    Tachometer = 3,
    Shuffle = 4,
    Tree = 5,
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn substream(seed: u64, stream: Stream, index: u64) -> StreamRng {
    let key = mix64(seed ^ mix64(stream as u64));
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(index);
    rng
}

/// Derives a child seed from a master seed and a textual identifier (FNV-1a
/// over the identifier, then mixed with the master seed).
pub fn derive_seed(master: u64, id: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in id.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    mix64(master ^ h)
}
