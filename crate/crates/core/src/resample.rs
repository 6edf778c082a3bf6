//! Fourier-crop downsampling of projection stacks.

use alloc::format;
use alloc::vec;

use crate::error::{Result, TomoError};
use crate::fft::{C64, FftPlan};
use crate::grid::TiltSeries;

/// Signed frequency index of bin `k` out of `n`.
#[inline]
fn signed_freq(k: usize, n: usize) -> i64 {
    if k <= n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

/// Keeps the central frequency block of each projection and scales so the
/// mean intensity is preserved. `factor` must divide both detector
/// dimensions. Folding the source Nyquist pair into the target Nyquist
/// bin keeps real input exactly real.
pub fn downsample_stack(ts: &TiltSeries, factor: usize) -> Result<TiltSeries> {
    if factor < 1 {
        return Err(TomoError::InvalidInput(alloc::string::String::from(
            "downsample factor must be >= 1",
        )));
    }
    if !ts.det_u.is_multiple_of(factor) || !ts.det_v.is_multiple_of(factor) {
        return Err(TomoError::InvalidInput(format!(
            "factor {} does not divide detector {}x{}",
            factor, ts.det_u, ts.det_v
        )));
    }
    if factor == 1 {
        return Ok(ts.clone());
    }
    let (du, dv) = (ts.det_u, ts.det_v);
    let (mu, mv) = (du / factor, dv / factor);
    let plan_u = FftPlan::new(du);
    let plan_v = FftPlan::new(dv);
    let plan_mu = FftPlan::new(mu);
    let plan_mv = FftPlan::new(mv);
    let scale = 1.0 / (factor * factor) as f64;
    let mut out = vec![0.0f32; ts.n_tilts() * mu * mv];
    for tilt in 0..ts.n_tilts() {
        // forward 2D transform of the source projection
        let src = ts.projection(tilt);
        let mut freq = vec![C64::ZERO; du * dv];
        for (slot, &v) in freq.iter_mut().zip(src.iter()) {
            *slot = C64::new(v as f64, 0.0);
        }
        for row in freq.chunks_exact_mut(du) {
            plan_u.forward(row);
        }
        let mut col = vec![C64::ZERO; dv];
        for iu in 0..du {
            for (iv, slot) in col.iter_mut().enumerate() {
                *slot = freq[iu + du * iv];
            }
            plan_v.forward(&mut col);
            for (iv, slot) in col.iter().enumerate() {
                freq[iu + du * iv] = *slot;
            }
        }
        // gather the retained block; each target bin sums every source
        // bin congruent to it on the kept boundary (Nyquist folding)
        let mut small = vec![C64::ZERO; mu * mv];
        for tv in 0..mv {
            let fv = signed_freq(tv, mv);
            for tu in 0..mu {
                let fu = signed_freq(tu, mu);
                let mut acc = C64::ZERO;
                let u_srcs: &[i64] = if 2 * (fu.unsigned_abs() as usize) == mu {
                    &[fu, -fu]
                } else {
                    core::slice::from_ref(&fu)
                };
                let v_srcs: &[i64] = if 2 * (fv.unsigned_abs() as usize) == mv {
                    &[fv, -fv]
                } else {
                    core::slice::from_ref(&fv)
                };
                for &su in u_srcs {
                    for &sv in v_srcs {
                        let ku = su.rem_euclid(du as i64) as usize;
                        let kv = sv.rem_euclid(dv as i64) as usize;
                        acc = acc + freq[ku + du * kv];
                    }
                }
                small[tu + mu * tv] = acc;
            }
        }
        // inverse 2D transform of the cropped block
        for row in small.chunks_exact_mut(mu) {
            plan_mu.inverse(row);
        }
        let mut col = vec![C64::ZERO; mv];
        for iu in 0..mu {
            for (iv, slot) in col.iter_mut().enumerate() {
                *slot = small[iu + mu * iv];
            }
            plan_mv.inverse(&mut col);
            for (iv, slot) in col.iter().enumerate() {
                small[iu + mu * iv] = *slot;
            }
        }
        let dst = &mut out[tilt * mu * mv..(tilt + 1) * mu * mv];
        for (o, c) in dst.iter_mut().zip(small.iter()) {
            debug_assert!(c.im.abs() < 1e-6 * (c.re.abs() + 1.0));
            *o = (c.re * scale) as f32;
        }
    }
    TiltSeries::new(ts.geometry.clone(), mu, mv, out, ts.kind)
}
