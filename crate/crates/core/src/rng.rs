//! Named random substreams.
//!
//! Every random draw descends from a single root seed. A substream is
//! identified by a module tag and an index (usually the Monte Carlo run
//! number), and its ChaCha8 key is the concatenation
//!
//! ```text
//!     root.to_le_bytes() || fnv1a64(tag).to_le_bytes() || index.to_le_bytes() || [0; 8]
//! ```
//!
//! so any single trajectory can be regenerated in isolation from
//! `(root, tag, index)` alone, independent of worker count or scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a64(tag: &str) -> u64 {
    tag.bytes()
        .fold(FNV_OFFSET, |h, b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// Deterministic generator for run `index` of the experiment tagged `tag`.
pub fn substream(root: u64, tag: &str, index: u64) -> SimRng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&root.to_le_bytes());
    key[8..16].copy_from_slice(&fnv1a64(tag).to_le_bytes());
    key[16..24].copy_from_slice(&index.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}
