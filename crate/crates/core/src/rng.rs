//! Counter-based random substreams.
//!
//! Every random quantity in the crate is drawn from a ChaCha8 stream addressed
//! by `(seed, label, index)`: the label and master seed select the key, the
//! index selects the ChaCha stream. Stream `index` is therefore reproducible
//! without generating streams `0..index`, which is what makes parallel draws
//! scheduling-independent.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a master seed and a label.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    // FNV-1a over the label, then mixed with the seed.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    splitmix64(splitmix64(seed) ^ h)
}

/// Derives a child seed from a master seed, a label and an index.
pub fn derive_indexed(seed: u64, label: &str, index: u64) -> u64 {
    splitmix64(derive_seed(seed, label) ^ splitmix64(index.wrapping_mul(GOLDEN)))
}

/// Opens stream `index` of the generator keyed by `(seed, label)`.
pub fn substream(seed: u64, label: &str, index: u64) -> StreamRng {
    let mut key = [0u8; 32];
    let k = derive_seed(seed, label);
    for (lane, chunk) in key.chunks_exact_mut(8).enumerate() {
        let word = splitmix64(k ^ (lane as u64).wrapping_mul(GOLDEN));
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}
