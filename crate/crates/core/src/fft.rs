//! Complex FFT used by the ramp filter, Fourier cropping, and FSC.
//!
//! Power-of-two lengths run an iterative radix-2 Cooley-Tukey; everything
//! else goes through Bluestein's chirp-z reduction onto a padded
//! power-of-two transform. Forward is unnormalized, inverse carries 1/n.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::ops::{Add, Mul, Sub};

use crate::math;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct C64 {
    pub re: f64,
    pub im: f64,
}

impl C64 {
    pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

    #[inline]
    pub fn new(re: f64, im: f64) -> Self {
        C64 { re, im }
    }

    #[inline]
    pub fn conj(self) -> Self {
        C64::new(self.re, -self.im)
    }

    #[inline]
    pub fn scale(self, s: f64) -> Self {
        C64::new(self.re * s, self.im * s)
    }

    #[inline]
    pub fn norm_sq(self) -> f64 {
        self.re * self.re + self.im * self.im
    }

    /// e^{i*angle}
    #[inline]
    pub fn cis(angle: f64) -> Self {
        C64::new(math::cos(angle), math::sin(angle))
    }
}

impl Add for C64 {
    type Output = C64;
    #[inline]
    fn add(self, rhs: C64) -> C64 {
        C64::new(self.re + rhs.re, self.im + rhs.im)
    }
}

impl Sub for C64 {
    type Output = C64;
    #[inline]
    fn sub(self, rhs: C64) -> C64 {
        C64::new(self.re - rhs.re, self.im - rhs.im)
    }
}

impl Mul for C64 {
    type Output = C64;
    #[inline]
    fn mul(self, rhs: C64) -> C64 {
        C64::new(
            self.re * rhs.re - self.im * rhs.im,
            self.re * rhs.im + self.im * rhs.re,
        )
    }
}

/// Smallest power of two >= n.
pub fn next_pow2(n: usize) -> usize {
    let mut p = 1;
    while p < n {
        p <<= 1;
    }
    p
}

enum PlanKind {
    Pow2,
    Bluestein {
        /// chirp[k] = e^{-i pi k^2 / n}
        chirp: Vec<C64>,
        /// forward FFT of the wrapped conjugate chirp, length m
        b_fft: Vec<C64>,
        m: usize,
        inner: Box<FftPlan>,
    },
}

/// Reusable transform of a fixed length.
pub struct FftPlan {
    n: usize,
    /// twiddles[k] = e^{-2 pi i k / n} for k in 0..n/2 (pow2 plans only)
    twiddles: Vec<C64>,
    kind: PlanKind,
}

impl FftPlan {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "fft length must be >= 1");
        if n.is_power_of_two() {
            let twiddles = (0..n / 2)
                .map(|k| C64::cis(-2.0 * PI * k as f64 / n as f64))
                .collect();
            FftPlan {
                n,
                twiddles,
                kind: PlanKind::Pow2,
            }
        } else {
            let m = next_pow2(2 * n - 1);
            let inner = Box::new(FftPlan::new(m));
            // k^2 mod 2n keeps the chirp argument small and accurate.
            let chirp: Vec<C64> = (0..n)
                .map(|k| {
                    let sq = (k as u64 * k as u64) % (2 * n as u64);
                    C64::cis(-PI * sq as f64 / n as f64)
                })
                .collect();
            let mut b = vec![C64::ZERO; m];
            b[0] = chirp[0].conj();
            for k in 1..n {
                let c = chirp[k].conj();
                b[k] = c;
                b[m - k] = c;
            }
            inner.forward(&mut b);
            FftPlan {
                n,
                twiddles: Vec::new(),
                kind: PlanKind::Bluestein {
                    chirp,
                    b_fft: b,
                    m,
                    inner,
                },
            }
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// In-place forward DFT: X[k] = sum_j x[j] e^{-2 pi i jk/n}.
    pub fn forward(&self, data: &mut [C64]) {
        assert_eq!(data.len(), self.n);
        match &self.kind {
            PlanKind::Pow2 => self.fft_pow2(data, false),
            PlanKind::Bluestein {
                chirp,
                b_fft,
                m,
                inner,
            } => {
                let n = self.n;
                let mut a = vec![C64::ZERO; *m];
                for k in 0..n {
                    a[k] = data[k] * chirp[k];
                }
                inner.forward(&mut a);
                for (ak, bk) in a.iter_mut().zip(b_fft.iter()) {
                    *ak = *ak * *bk;
                }
                inner.inverse(&mut a);
                for k in 0..n {
                    data[k] = a[k] * chirp[k];
                }
            }
        }
    }

    /// In-place inverse DFT including the 1/n factor.
    pub fn inverse(&self, data: &mut [C64]) {
        assert_eq!(data.len(), self.n);
        match &self.kind {
            PlanKind::Pow2 => {
                self.fft_pow2(data, true);
                let s = 1.0 / self.n as f64;
                for v in data.iter_mut() {
                    *v = v.scale(s);
                }
            }
            PlanKind::Bluestein { .. } => {
                for v in data.iter_mut() {
                    *v = v.conj();
                }
                self.forward(data);
                let s = 1.0 / self.n as f64;
                for v in data.iter_mut() {
                    *v = C64::new(v.re * s, -v.im * s);
                }
            }
        }
    }

    fn fft_pow2(&self, data: &mut [C64], inverse: bool) {
        let n = self.n;
        if n <= 1 {
            return;
        }
        // bit-reversal permutation
        let mut j = 0usize;
        for i in 0..n - 1 {
            if i < j {
                data.swap(i, j);
            }
            let mut mask = n >> 1;
            while j & mask != 0 {
                j &= !mask;
                mask >>= 1;
            }
            j |= mask;
        }
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let tstep = n / len;
            let mut base = 0;
            while base < n {
                for k in 0..half {
                    let tw = self.twiddles[k * tstep];
                    let tw = if inverse { tw.conj() } else { tw };
                    let u = data[base + k];
                    let t = data[base + k + half] * tw;
                    data[base + k] = u + t;
                    data[base + k + half] = u - t;
                }
                base += len;
            }
            len <<= 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng64;

    /// Quadratic-time reference DFT.
    fn dft_naive(x: &[C64]) -> Vec<C64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                let mut acc = C64::ZERO;
                for (j, &v) in x.iter().enumerate() {
                    acc = acc + v * C64::cis(-2.0 * PI * (j * k % n) as f64 / n as f64);
                }
                acc
            })
            .collect()
    }

    fn random_signal(n: usize, seed: u64) -> Vec<C64> {
        let mut rng = Rng64::new(seed);
        (0..n)
            .map(|_| C64::new(rng.next_uniform(-1.0, 1.0), rng.next_uniform(-1.0, 1.0)))
            .collect()
    }

    #[test]
    fn matches_naive_dft_all_lengths() {
        for n in (1..=24).chain([32, 37, 41, 64, 100, 128, 205]) {
            let x = random_signal(n, 1000 + n as u64);
            let expect = dft_naive(&x);
            let plan = FftPlan::new(n);
            let mut got = x.clone();
            plan.forward(&mut got);
            for (g, e) in got.iter().zip(expect.iter()) {
                assert!(
                    (g.re - e.re).abs() < 1e-9 && (g.im - e.im).abs() < 1e-9,
                    "n={n}: {g:?} vs {e:?}"
                );
            }
        }
    }

    #[test]
    fn forward_inverse_roundtrip() {
        for n in [1, 2, 3, 8, 12, 41, 64, 100] {
            let x = random_signal(n, 7 * n as u64 + 3);
            let plan = FftPlan::new(n);
            let mut y = x.clone();
            plan.forward(&mut y);
            plan.inverse(&mut y);
            for (a, b) in x.iter().zip(y.iter()) {
                assert!((a.re - b.re).abs() < 1e-12, "n={n}");
                assert!((a.im - b.im).abs() < 1e-12, "n={n}");
            }
        }
    }

    #[test]
    fn impulse_transforms_to_constant() {
        let plan = FftPlan::new(16);
        let mut x = vec![C64::ZERO; 16];
        x[0] = C64::new(1.0, 0.0);
        plan.forward(&mut x);
        for v in &x {
            assert!((v.re - 1.0).abs() < 1e-12 && v.im.abs() < 1e-12);
        }
    }

    #[test]
    fn next_pow2_values() {
        assert_eq!(next_pow2(1), 1);
        assert_eq!(next_pow2(2), 2);
        assert_eq!(next_pow2(3), 4);
        assert_eq!(next_pow2(64), 64);
        assert_eq!(next_pow2(65), 128);
    }
}
