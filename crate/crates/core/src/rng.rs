//! Counter-based random streams.
//!
//! A stream is addressed by `(master seed, stream index)`. The ChaCha stream
//! id carries the index, so replica `k` can be regenerated without touching
//! replicas `0..k`. Purpose tags fold into the key, which keeps e.g. graph
//! generation and exploration tie-breaking independently reproducible.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Purpose tags for sub-streams.
pub mod purpose {
    pub const GRAPH: u64 = 1;
    pub const WEIGHTS: u64 = 2;
    pub const ROOTS: u64 = 3;
    pub const TREE: u64 = 4;
    pub const COIN: u64 = 5;
    pub const TIE_BREAK: u64 = 6;
    pub const SPINE: u64 = 7;
    pub const BOOTSTRAP: u64 = 8;
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn key_for(seed: u64, tag: u64) -> [u8; 32] {
    let mut state = seed ^ tag.wrapping_mul(0xd1b5_4a32_d192_ed03);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    key
}

#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    index: u64,
    tag: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, index: u64) -> Self {
        Self::with_tag(seed, index, 0)
    }

    fn with_tag(seed: u64, index: u64, tag: u64) -> Self {
        let mut inner = ChaCha8Rng::from_seed(key_for(seed, tag));
        inner.set_stream(index);
        Self {
            seed,
            index,
            tag,
            inner,
        }
    }

    /// An independent stream for the same replica, keyed by `purpose`.
    pub fn substream(&self, purpose: u64) -> Self {
        let tag = splitmix64(&mut (self.tag ^ purpose.rotate_left(17)));
        Self::with_tag(self.seed, self.index, tag)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    /// Number of 32-bit words consumed so far.
    pub fn counter(&self) -> u128 {
        self.inner.get_word_pos()
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }
}
