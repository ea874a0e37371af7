//! Reproducible random streams.
//!
//! Every random quantity is drawn from a ChaCha8 stream keyed by the root
//! seed, with the stream id derived from a tag path such as
//! `(purpose, graph index, replicate)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub mod purpose {
    pub const MODEL: u64 = 1;
    pub const SAMPLE: u64 = 2;
    pub const LANGEVIN: u64 = 3;
    pub const CALIBRATE: u64 = 4;
    pub const BENCH: u64 = 5;
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mix a tag path into a single 64-bit identifier.
pub fn derive(root: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix(root), |acc, &t| splitmix(acc ^ splitmix(t)))
}

/// Independent stream for `tags` under `root`.
pub fn substream(root: u64, tags: &[u64]) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(root);
    rng.set_stream(derive(root, tags));
    rng
}
