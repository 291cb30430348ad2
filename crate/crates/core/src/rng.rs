//! Counter-based random number generation.
//!
//! Every random draw in the crate is a pure function of
//! `(seed, sample_index, stream, word_index)`, so Monte Carlo runs are
//! reproducible bit-for-bit no matter how work is scheduled across workers.
//! The word function is the SplitMix64 output permutation seeded through a
//! three-stage key mix; streams are cheap to create and never overlap.

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive the stream key for `(seed, sample_index, stream)`.
#[inline]
pub fn stream_key(seed: u64, sample_index: u64, stream: u64) -> u64 {
    let mut k = mix64(seed ^ GOLDEN);
    k = mix64(k ^ sample_index.wrapping_mul(0xd604_2895_29bb_5cf1));
    mix64(k ^ stream.wrapping_mul(0x8f9e_6ccd_8a75_3b2b))
}

/// `word`-th 64-bit output of the stream identified by `key`.
#[inline]
pub fn word_at(key: u64, word: u64) -> u64 {
    mix64(key.wrapping_add(word.wrapping_add(1).wrapping_mul(GOLDEN)))
}

/// A positioned view into one random stream.
///
/// Cloning is cheap; advancing one clone never affects another. The counter
/// is part of the value, so simulation states can checkpoint their RNG.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamRng {
    key: u64,
    counter: u64,
}

impl StreamRng {
    pub fn new(seed: u64, sample_index: u64, stream: u64) -> Self {
        StreamRng {
            key: stream_key(seed, sample_index, stream),
            counter: 0,
        }
    }

    pub fn from_key(key: u64) -> Self {
        StreamRng { key, counter: 0 }
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let w = word_at(self.key, self.counter);
        self.counter += 1;
        w
    }

    /// Uniform in the open interval (0, 1).
    #[inline]
    pub fn next_uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Standard normal via Box-Muller; consumes exactly two words.
    #[inline]
    pub fn next_normal(&mut self) -> f64 {
        self.next_normal_pair().0
    }

    /// Two independent standard normals from one Box-Muller transform.
    #[inline]
    pub fn next_normal_pair(&mut self) -> (f64, f64) {
        let u1 = self.next_uniform();
        let u2 = self.next_uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
        (r * c, r * s)
    }

    /// Fill `out` with i.i.d. standard normals (2 words each, pair-packed).
    pub fn fill_normal(&mut self, out: &mut [f64]) {
        let mut i = 0;
        while i + 1 < out.len() {
            let (a, b) = self.next_normal_pair();
            out[i] = a;
            out[i + 1] = b;
            i += 2;
        }
        if i < out.len() {
            out[i] = self.next_normal();
        }
    }
}
