//! Deterministic random streams.
//!
//! Every random decision in the crate draws from a stream derived from the
//! master seed plus a stable purpose key (e.g. `("propose", trial_index)`).
//! Streams are stateless with respect to each other, so a run can be resumed
//! at any trial boundary and continue bit-for-bit identically to an
//! uninterrupted run. The generator is xoshiro256++ seeded through splitmix64.

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A single xoshiro256++ stream.
#[derive(Debug, Clone)]
pub struct Stream {
    s: [u64; 4],
}

impl Stream {
    pub fn new(seed: u64) -> Self {
        let mut state = seed;
        let s = [
            splitmix64(&mut state),
            splitmix64(&mut state),
            splitmix64(&mut state),
            splitmix64(&mut state),
        ];
        Stream { s }
    }

    pub fn next_u64(&mut self) -> u64 {
        let result = self.s[0]
            .wrapping_add(self.s[3])
            .rotate_left(23)
            .wrapping_add(self.s[0]);
        let t = self.s[1] << 17;
        self.s[2] ^= self.s[0];
        self.s[3] ^= self.s[1];
        self.s[1] ^= self.s[2];
        self.s[0] ^= self.s[3];
        self.s[2] ^= t;
        self.s[3] = self.s[3].rotate_left(45);
        result
    }

    /// Uniform draw in `[0, 1)` with 53 bits of precision.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in `[lo, hi)`.
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in the inclusive range `[lo, hi]`.
    pub fn uniform_int(&mut self, lo: i64, hi: i64) -> i64 {
        debug_assert!(lo <= hi);
        let span = (hi - lo + 1) as f64;
        let k = (self.uniform() * span) as i64;
        lo + k.min(hi - lo)
    }

    /// Standard normal via Box-Muller.
    pub fn standard_normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.uniform_int(0, i as i64) as usize;
            xs.swap(i, j);
        }
    }
}

/// Derive the stream for a given purpose within a seeded run.
///
/// The purpose string and index are folded into the seed, so distinct
/// purposes never share a stream.
pub fn stream_for(seed: u64, purpose: &str, index: u64) -> Stream {
    let mut state = seed ^ 0xA076_1D64_78BD_642F;
    let mut acc = splitmix64(&mut state);
    for &b in purpose.as_bytes() {
        state ^= b as u64;
        acc ^= splitmix64(&mut state);
    }
    state ^= index;
    acc ^= splitmix64(&mut state);
    Stream::new(acc)
}
