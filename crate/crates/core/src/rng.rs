//! Counter-based random numbers.
//!
//! Every random draw is a pure function of `(seed, iteration, token)`, so the
//! value a token sees does not depend on which thread processes it or in which
//! order chunks and work items are visited.

/// Source of per-token uniforms in `[0, 1)`.
pub trait UniformSource: Sync {
    fn uniform(&self, iteration: u32, token: u64) -> f64;

    /// Uniform integer in `[0, n)`. The default maps the uniform draw by
    /// truncation, which is exact enough for `n <= 2^16`.
    fn below(&self, iteration: u32, token: u64, n: u32) -> u32 {
        let k = (self.uniform(iteration, token) * n as f64) as u32;
        k.min(n - 1)
    }
}

/// SplitMix64-style keyed hash over `(seed, iteration, token)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CounterRng {
    seed: u64,
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Raw 64-bit output for the given counter.
    #[inline]
    pub fn bits(&self, iteration: u32, token: u64) -> u64 {
        let a = mix(self.seed.wrapping_add(GOLDEN));
        let b = mix(a ^ (iteration as u64).wrapping_mul(GOLDEN).wrapping_add(1));
        mix(b ^ token.wrapping_mul(0xd1b5_4a32_d192_ed03).wrapping_add(GOLDEN))
    }
}

impl UniformSource for CounterRng {
    #[inline]
    fn uniform(&self, iteration: u32, token: u64) -> f64 {
        // top 53 bits → [0, 1)
        (self.bits(iteration, token) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    #[inline]
    fn below(&self, iteration: u32, token: u64, n: u32) -> u32 {
        ((self.bits(iteration, token) as u128 * n as u128) >> 64) as u32
    }
}

impl<F> UniformSource for F
where
    F: Fn(u32, u64) -> f64 + Sync,
{
    fn uniform(&self, iteration: u32, token: u64) -> f64 {
        self(iteration, token)
    }
}
