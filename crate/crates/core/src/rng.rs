//! Deterministic, splittable random streams.
//!
//! A [`RandomStream`] is identified by a base seed and a split path. Every
//! stream owns a 64-bit key derived by folding the path into the seed, and
//! generates output with a SplitMix-style counter whose increment (gamma) is
//! itself derived from the key. Children are derived from the key only, so a
//! child obtained by `split(i)` does not depend on how many values the parent
//! has already produced.

use rand::RngCore;
use smallvec::SmallVec;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Split lineage of a stream. Paths up to depth 4 are stored inline.
pub type StreamPath = SmallVec<[u64; 4]>;

#[derive(Clone, Debug)]
pub struct RandomStream {
    base_seed: u64,
    path: StreamPath,
    key: u64,
    state: u64,
    gamma: u64,
}

impl RandomStream {
    pub fn new(base_seed: u64, path: &[u64]) -> Self {
        let mut key = root_key(base_seed);
        for &index in path {
            key = child_key(key, index);
        }
        Self::from_key(base_seed, path.iter().copied().collect(), key)
    }

    fn from_key(base_seed: u64, path: StreamPath, key: u64) -> Self {
        Self {
            base_seed,
            path,
            key,
            state: mix64(key ^ 0x6A09_E667_F3BC_C909),
            gamma: mix_gamma(key ^ 0xBB67_AE85_84CA_A73B),
        }
    }

    /// Child stream at `index`; equal to `RandomStream::new(seed, path ++ [index])`.
    pub fn split(&self, index: u64) -> Self {
        let mut path = self.path.clone();
        path.push(index);
        Self::from_key(self.base_seed, path, child_key(self.key, index))
    }

    pub fn base_seed(&self) -> u64 {
        self.base_seed
    }

    pub fn path(&self) -> &[u64] {
        &self.path
    }

    #[inline]
    pub fn next_raw(&mut self) -> u64 {
        self.state = self.state.wrapping_add(self.gamma);
        mix64(self.state)
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_raw() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `(0, 1]`, safe to pass to `ln`.
    #[inline]
    pub fn next_open_f64(&mut self) -> f64 {
        1.0 - self.next_f64()
    }
}

/// Shorthand for [`RandomStream::new`].
pub fn make_stream(base_seed: u64, stream_path: &[u64]) -> RandomStream {
    RandomStream::new(base_seed, stream_path)
}

impl RngCore for RandomStream {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        (self.next_raw() >> 32) as u32
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.next_raw()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        rand::rand_core::impls::fill_bytes_via_next(self, dst)
    }
}

fn root_key(seed: u64) -> u64 {
    mix64(seed.wrapping_add(GOLDEN_GAMMA))
}

fn child_key(parent: u64, index: u64) -> u64 {
    let tag = mix64(index.wrapping_mul(GOLDEN_GAMMA) ^ 0xD1B5_4A32_D192_ED03);
    mix64(parent.rotate_left(23) ^ tag)
}

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

// Odd gamma with enough bit transitions, as in SplittableRandom.
fn mix_gamma(z: u64) -> u64 {
    let mut z = (z ^ (z >> 33)).wrapping_mul(0xFF51_AFD7_ED55_8CCD);
    z = (z ^ (z >> 33)).wrapping_mul(0xC4CE_B9FE_1A85_EC53);
    z = (z ^ (z >> 33)) | 1;
    if (z ^ (z >> 1)).count_ones() < 24 {
        z ^ 0xAAAA_AAAA_AAAA_AAAA
    } else {
        z
    }
}
