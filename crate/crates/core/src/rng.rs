//! Seedable pseudo-random numbers with a pinned algorithm.
//!
//! Every stochastic choice in this crate (synthetic fixtures, weight init,
//! shuffles, dropout masks, bootstrap resamples) flows through this module so
//! that a seed fully determines the output, independent of platform and of
//! any third-party RNG version. The generator is xoshiro256** seeded through
//! SplitMix64, with the following fixed mappings:
//!
//! - `next_f64`: take the top 53 bits of `next_u64`, scale by 2^-53 → [0, 1)
//! - `below(n)`: multiply-shift `(next_u64 * n) >> 64` (bias < n / 2^64)
//! - `normal`: Box-Muller on two uniforms, spare value discarded
//! - `shuffle`: Fisher-Yates from the back of the slice
//!
//! Derived seeds (per fold, per grid combination, per forest tree) come from
//! [`mix64`], so parallel schedules cannot reorder streams.

/// xoshiro256** generator.
#[derive(Debug, Clone)]
pub struct Rng {
    state: [u64; 4],
}

impl Rng {
    /// Expand a 64-bit seed into the full state via SplitMix64.
    pub fn seed_from_u64(seed: u64) -> Self {
        let mut sm = seed;
        let mut state = [0u64; 4];
        for slot in &mut state {
            *slot = splitmix64(&mut sm);
        }
        Rng { state }
    }

    pub fn next_u64(&mut self) -> u64 {
        let s = &mut self.state;
        let result = s[1].wrapping_mul(5).rotate_left(7).wrapping_mul(9);
        let t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = s[3].rotate_left(45);
        result
    }

    /// Uniform in [0, 1) with 53-bit resolution.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in [0, n). `n` must be non-zero.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        (((self.next_u64() as u128) * (n as u128)) >> 64) as usize
    }

    /// Standard normal sample via Box-Muller.
    pub fn normal(&mut self, mean: f64, sd: f64) -> f64 {
        // 1 - u keeps the argument of ln strictly positive.
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        let r = (-2.0 * u1.ln()).sqrt();
        mean + sd * r * (2.0 * std::f64::consts::PI * u2).cos()
    }

    /// Bernoulli trial with success probability `p`.
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic 64-bit stream derivation: `mix64(seed, k)` is the SplitMix64
/// finalizer applied to `seed ^ (k + 1) * 0x9E3779B97F4A7C15`.
pub fn mix64(seed: u64, stream: u64) -> u64 {
    let mut s = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    splitmix64(&mut s)
}
