//! Pinned random number generation.
//!
//! All seeded randomness in the crate (splits, subsamples, synthetic draws,
//! Monte-Carlo replications) comes from SplitMix64 so that a seed means the
//! same stream in any language. The generator is counter based: draw `k` of
//! stream `seed` is `mix(seed + (k + 1)·0x9E3779B97F4A7C15)`, so any draw can be
//! computed directly with [`SplitMix64::at`].
//!
//! Derived quantities are pinned as well:
//! - `next_f64` uses the top 53 bits: `(u >> 11) · 2⁻⁵³`, in `[0, 1)`.
//! - `below(n)` is the high word of the 128-bit product `u · n`.
//! - `shuffle` is Fisher–Yates from the last index down, `j = below(i + 1)`.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitMix64 {
    seed: u64,
    counter: u64,
}

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { seed, counter: 0 }
    }

    /// Draw number `index` (0-based) of the stream for `seed`.
    pub fn at(seed: u64, index: u64) -> u64 {
        mix(seed.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
    }

    /// Independent child stream; `stream` selects which one.
    pub fn derive(seed: u64, stream: u64) -> Self {
        Self::new(Self::at(seed ^ 0xD1B5_4A32_D192_ED03, stream))
    }

    pub fn position(&self) -> u64 {
        self.counter
    }

    pub fn next_u64(&mut self) -> u64 {
        let v = Self::at(self.seed, self.counter);
        self.counter += 1;
        v
    }

    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in `0..n`; `n` must be positive.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        ((self.next_u64() as u128 * n as u128) >> 64) as u64
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        // SplitMix64 seeded with 0 produces this well-known first output.
        let mut g = SplitMix64::new(0);
        assert_eq!(g.next_u64(), 0xE220_A839_7B1D_CDAF);
        assert_eq!(g.next_u64(), 0x6E78_9E6A_A1B9_65F4);
    }

    #[test]
    fn counter_access_matches_stream() {
        let mut g = SplitMix64::new(42);
        let drawn: Vec<u64> = (0..10).map(|_| g.next_u64()).collect();
        for (k, v) in drawn.iter().enumerate() {
            assert_eq!(*v, SplitMix64::at(42, k as u64));
        }
    }

    #[test]
    fn unit_interval_and_below() {
        let mut g = SplitMix64::new(7);
        for _ in 0..10_000 {
            let u = g.next_f64();
            assert!((0.0..1.0).contains(&u));
            assert!(g.below(3) < 3);
        }
    }

    #[test]
    fn shuffle_is_permutation() {
        let mut v: Vec<usize> = (0..50).collect();
        SplitMix64::new(3).shuffle(&mut v);
        let mut s = v.clone();
        s.sort_unstable();
        assert_eq!(s, (0..50).collect::<Vec<_>>());
        assert_ne!(v, s);
    }
}
