//! Deterministic random numbers.
//!
//! Everything stochastic in this crate runs off [`Rng64`], a SplitMix64
//! generator. Noise synthesis derives one independent stream per detector
//! pixel from `(seed, tilt, iu, iv)` so that serial and parallel runs
//! produce bit-identical output.

use crate::math;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// SplitMix64 sequential generator.
#[derive(Debug, Clone)]
pub struct Rng64 {
    state: u64,
}

impl Rng64 {
    pub fn new(seed: u64) -> Self {
        Rng64 { state: seed }
    }

    /// Independent stream keyed by `seed` and a word tuple. Used for
    /// counter-based per-pixel noise so the draw order never matters.
    pub fn stream(seed: u64, words: &[u64]) -> Self {
        let mut state = mix(seed ^ GOLDEN);
        for &w in words {
            state = mix(state.wrapping_add(GOLDEN) ^ w.wrapping_mul(0xD605_1C84_C274_9B6D));
        }
        Rng64 { state }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix(self.state)
    }

    /// Uniform in [0, 1) with 53 random bits.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in (0, 1]; safe as a log argument.
    #[inline]
    pub fn next_f64_open(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in [0, n). Lemire multiply-shift; bias is
    /// negligible for the n used here (n << 2^64).
    #[inline]
    pub fn next_range(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// Uniform in [lo, hi).
    #[inline]
    pub fn next_uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Standard normal via Box-Muller.
    pub fn next_normal(&mut self) -> f64 {
        let u1 = self.next_f64_open();
        let u2 = self.next_f64();
        math::sqrt(-2.0 * math::ln(u1)) * math::cos(2.0 * core::f64::consts::PI * u2)
    }

    /// Poisson sample with mean `lambda >= 0`.
    ///
    /// Knuth's product method below 30, Hörmann's PTRS transformed
    /// rejection above. Both consume uniforms from this stream only.
    pub fn next_poisson(&mut self, lambda: f64) -> u64 {
        if lambda <= 0.0 {
            return 0;
        }
        if lambda < 30.0 {
            let limit = math::exp(-lambda);
            let mut k = 0u64;
            let mut prod = self.next_f64_open();
            while prod > limit {
                k += 1;
                prod *= self.next_f64_open();
            }
            k
        } else {
            self.poisson_ptrs(lambda)
        }
    }

    fn poisson_ptrs(&mut self, lambda: f64) -> u64 {
        let slam = math::sqrt(lambda);
        let loglam = math::ln(lambda);
        let b = 0.931 + 2.53 * slam;
        let a = -0.059 + 0.02483 * b;
        let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
        let vr = 0.9277 - 3.6224 / (b - 2.0);
        loop {
            let u = self.next_f64() - 0.5;
            let v = self.next_f64_open();
            let us = 0.5 - math::abs(u);
            let k = math::floor((2.0 * a / us + b) * u + lambda + 0.43);
            if us >= 0.07 && v <= vr {
                return k as u64;
            }
            if k < 0.0 || (us < 0.013 && v > us) {
                continue;
            }
            let lhs = math::ln(v * inv_alpha / (a / (us * us) + b));
            let rhs = k * loglam - lambda - math::lgamma(k + 1.0);
            if lhs <= rhs {
                return k as u64;
            }
        }
    }
}
