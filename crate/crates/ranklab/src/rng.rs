//! Deterministic pseudo-randomness.
//!
//! Every randomized routine in this crate draws from [`SplitMix64`] and
//! derives sub-streams with [`derive_stream`], so a run is a pure function
//! of its seed: identical on every platform, byte for byte, and independent
//! of thread scheduling (each worker gets its own derived stream).

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// SplitMix64 generator (Steele–Lea–Flood). One 64-bit word of state, one
/// multiply–xorshift mix per output word. Fast, equidistributed, and
/// trivially portable, which is all the simulations here require.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix(self.state)
    }

    /// Uniform draw from `[0, 1)` with 53 random bits.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Unbiased uniform integer in `[0, n)` (Lemire's multiply-shift with
    /// rejection).
    ///
    /// Panics if `n == 0`.
    #[inline]
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0) is meaningless");
        let mut x = self.next_u64();
        let mut m = (x as u128) * (n as u128);
        let mut low = m as u64;
        if low < n {
            let threshold = n.wrapping_neg() % n;
            while low < threshold {
                x = self.next_u64();
                m = (x as u128) * (n as u128);
                low = m as u64;
            }
        }
        (m >> 64) as u64
    }

    #[inline]
    pub fn below_usize(&mut self, n: usize) -> usize {
        self.below(n as u64) as usize
    }
}

/// Collapses a parent seed and a list of stream tags into a child seed.
///
/// Used for per-walker, per-replicate, and per-query streams: workers draw
/// from `SplitMix64::new(derive_stream(seed, &[index]))`, so results do not
/// depend on which worker runs first.
pub fn derive_stream(seed: u64, tags: &[u64]) -> u64 {
    let mut acc = mix(seed ^ GOLDEN_GAMMA);
    for &tag in tags {
        acc = mix(acc.wrapping_add(GOLDEN_GAMMA) ^ mix(tag.wrapping_add(GOLDEN_GAMMA)));
    }
    acc
}
