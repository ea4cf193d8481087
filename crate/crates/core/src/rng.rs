//! Labelled, counter-based random streams.
//!
//! A stream is identified by `(seed, label)`. Its n-th output is a pure
//! function of the stream key and `n`, so streams never share state and
//! adding a consumer with a new label leaves every existing stream untouched.

use alloc::string::String;

use rand_core::RngCore;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Order-sensitive hash of a seed and a list of words.
pub fn hash_words(seed: u64, words: &[u64]) -> u64 {
    let mut h = mix64(seed ^ GOLDEN_GAMMA);
    for &w in words {
        h = mix64(h ^ mix64(w.wrapping_add(GOLDEN_GAMMA)));
    }
    h
}

#[derive(Debug, Clone)]
pub struct RandomStream {
    seed: u64,
    label: String,
    key: u64,
    counter: u64,
}

impl RandomStream {
    pub fn new(seed: u64, label: &str) -> Self {
        let key = mix64(seed ^ mix64(fnv1a(label.as_bytes())));
        RandomStream {
            seed,
            label: String::from(label),
            key,
            counter: 0,
        }
    }

    /// Stream keyed directly by a precomputed 64-bit key (e.g. a cell hash).
    pub fn from_key(key: u64) -> Self {
        RandomStream {
            seed: key,
            label: String::new(),
            key: mix64(key),
            counter: 0,
        }
    }

    /// Child stream labelled `"<label>/<sub>"` under the same seed.
    pub fn substream(&self, sub: &str) -> Self {
        let mut label = self.label.clone();
        label.push('/');
        label.push_str(sub);
        RandomStream::new(self.seed, &label)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Number of 64-bit words drawn so far.
    pub fn position(&self) -> u64 {
        self.counter
    }

    /// Uniform in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN_GAMMA)))
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        rand_core::impls::fill_bytes_via_next(self, dst)
    }
}
