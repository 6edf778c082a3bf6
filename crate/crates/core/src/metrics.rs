//! Quantitative evaluation: Fourier shell correlation, PSNR, and the
//! scalar FSC area summary.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Result, TomoError};
use crate::fft::{C64, FftPlan};
use crate::grid::Volume;
use crate::math;

/// FSC values per spherical frequency shell. Frequencies are shell
/// centers in cycles per voxel, in (0, 0.5].
#[derive(Debug, Clone, PartialEq)]
pub struct FscCurve {
    pub shell_frequencies: Vec<f64>,
    pub values: Vec<f64>,
    pub shell_counts: Vec<usize>,
}

/// 3D DFT of a volume (x, then y, then z passes).
fn fft3(vol: &Volume) -> Vec<C64> {
    let g = vol.grid;
    let (nx, ny, nz) = (g.nx, g.ny, g.nz);
    let mut data: Vec<C64> = vol
        .data
        .iter()
        .map(|&v| C64::new(v as f64, 0.0))
        .collect();
    // x axis: contiguous rows
    let plan_x = FftPlan::new(nx);
    for row in data.chunks_exact_mut(nx) {
        plan_x.forward(row);
    }
    // y axis
    let plan_y = FftPlan::new(ny);
    let mut buf = vec![C64::ZERO; ny];
    for iz in 0..nz {
        for ix in 0..nx {
            for (iy, slot) in buf.iter_mut().enumerate() {
                *slot = data[ix + nx * (iy + ny * iz)];
            }
            plan_y.forward(&mut buf);
            for (iy, slot) in buf.iter().enumerate() {
                data[ix + nx * (iy + ny * iz)] = *slot;
            }
        }
    }
    // z axis
    let plan_z = FftPlan::new(nz);
    let mut buf = vec![C64::ZERO; nz];
    for iy in 0..ny {
        for ix in 0..nx {
            for (iz, slot) in buf.iter_mut().enumerate() {
                *slot = data[ix + nx * (iy + ny * iz)];
            }
            plan_z.forward(&mut buf);
            for (iz, slot) in buf.iter().enumerate() {
                data[ix + nx * (iy + ny * iz)] = *slot;
            }
        }
    }
    data
}

/// Signed frequency index of DFT bin `k` out of `n`.
#[inline]
fn signed_freq(k: usize, n: usize) -> i64 {
    if k <= n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

/// Fourier shell correlation between two volumes on identical grids.
/// Shells are spherical annuli of `shell_width` frequency voxels centered
/// at integer multiples of the width; DC is excluded and shells without
/// support in both volumes are omitted.
pub fn fsc(a: &Volume, b: &Volume, shell_width: f64) -> Result<FscCurve> {
    let g = a.grid;
    if (g.nx, g.ny, g.nz) != (b.grid.nx, b.grid.ny, b.grid.nz) {
        return Err(TomoError::ShapeMismatch(format!(
            "volume grids differ: {}x{}x{} vs {}x{}x{}",
            g.nx, g.ny, g.nz, b.grid.nx, b.grid.ny, b.grid.nz
        )));
    }
    if !shell_width.is_finite() || shell_width <= 0.0 {
        return Err(TomoError::InvalidInput(String::from(
            "shell width must be > 0",
        )));
    }
    let fa = fft3(a);
    let fb = fft3(b);
    // shell radius measured in frequency voxels of the largest axis, so
    // cubic grids count plain bin radius
    let n_ref = g.nx.max(g.ny).max(g.nz) as f64;
    let max_shell = (n_ref / 2.0 / shell_width) as usize;
    let mut cross = vec![0.0f64; max_shell + 1];
    let mut pow_a = vec![0.0f64; max_shell + 1];
    let mut pow_b = vec![0.0f64; max_shell + 1];
    let mut counts = vec![0usize; max_shell + 1];
    for iz in 0..g.nz {
        let fz = signed_freq(iz, g.nz) as f64 / g.nz as f64;
        for iy in 0..g.ny {
            let fy = signed_freq(iy, g.ny) as f64 / g.ny as f64;
            for ix in 0..g.nx {
                let fx = signed_freq(ix, g.nx) as f64 / g.nx as f64;
                let rho = math::sqrt(fx * fx + fy * fy + fz * fz) * n_ref;
                let shell = math::floor(rho / shell_width + 0.5) as usize;
                if shell == 0 || shell > max_shell {
                    continue;
                }
                let idx = ix + g.nx * (iy + g.ny * iz);
                let va = fa[idx];
                let vb = fb[idx];
                cross[shell] += va.re * vb.re + va.im * vb.im; // Re(A conj B)
                pow_a[shell] += va.norm_sq();
                pow_b[shell] += vb.norm_sq();
                counts[shell] += 1;
            }
        }
    }
    let mut curve = FscCurve {
        shell_frequencies: Vec::new(),
        values: Vec::new(),
        shell_counts: Vec::new(),
    };
    for shell in 1..=max_shell {
        if counts[shell] == 0 || pow_a[shell] == 0.0 || pow_b[shell] == 0.0 {
            continue;
        }
        let denom = math::sqrt(pow_a[shell] * pow_b[shell]);
        let v = (cross[shell] / denom).clamp(-1.0, 1.0);
        curve
            .shell_frequencies
            .push(shell as f64 * shell_width / n_ref);
        curve.values.push(v);
        curve.shell_counts.push(counts[shell]);
    }
    Ok(curve)
}

/// Peak signal-to-noise ratio in dB with `b` as the reference; returns
/// infinity for identical volumes.
pub fn psnr(a: &Volume, b: &Volume) -> Result<f64> {
    let g = a.grid;
    if (g.nx, g.ny, g.nz) != (b.grid.nx, b.grid.ny, b.grid.nz) {
        return Err(TomoError::ShapeMismatch(String::from(
            "psnr needs identical grids",
        )));
    }
    let (lo, hi) = b.min_max();
    let range = (hi - lo) as f64;
    if range == 0.0 {
        return Err(TomoError::InvalidInput(String::from(
            "psnr reference volume is constant",
        )));
    }
    let mut mse = 0.0f64;
    for (x, y) in a.data.iter().zip(b.data.iter()) {
        let d = *x as f64 - *y as f64;
        mse += d * d;
    }
    mse /= a.data.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * math::log10(range * range / mse))
}

/// Trapezoidal area under the positive part of an FSC curve.
pub fn fsc_auc(curve: &FscCurve) -> f64 {
    let f = &curve.shell_frequencies;
    let v = &curve.values;
    let mut acc = 0.0;
    for i in 1..f.len() {
        let a = v[i - 1].max(0.0);
        let b = v[i].max(0.0);
        acc += 0.5 * (a + b) * (f[i] - f[i - 1]);
    }
    acc
}
