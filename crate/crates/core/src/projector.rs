//! Forward model: line integrals of a volume along tilted rays, plus the
//! stochastic observation operator.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Result, TomoError};
use crate::grid::{sample_volume_trilinear, SeriesKind, TiltGeometry, TiltSeries, Volume};
use crate::math;
use crate::par;
use crate::rng::Rng64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    None,
    Gaussian,
    Poisson,
}

/// Observation noise. Gaussian sigma is relative to the clean series'
/// standard deviation; Poisson dose is the expected count per pixel at
/// the series' mean level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    pub sigma: f64,
    pub dose: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn none() -> Self {
        NoiseModel {
            kind: NoiseKind::None,
            sigma: 0.0,
            dose: 1.0,
            seed: 0,
        }
    }

    pub fn gaussian(sigma: f64, seed: u64) -> Result<Self> {
        if !sigma.is_finite() || sigma < 0.0 {
            return Err(TomoError::InvalidInput(String::from(
                "gaussian sigma must be >= 0",
            )));
        }
        Ok(NoiseModel {
            kind: NoiseKind::Gaussian,
            sigma,
            dose: 1.0,
            seed,
        })
    }

    pub fn poisson(dose: f64, seed: u64) -> Result<Self> {
        if !dose.is_finite() || dose <= 0.0 {
            return Err(TomoError::InvalidInput(String::from(
                "poisson dose must be > 0",
            )));
        }
        Ok(NoiseModel {
            kind: NoiseKind::Poisson,
            sigma: 0.0,
            dose,
            seed,
        })
    }
}

/// Projects a volume to a clean tilt series by midpoint-rule integration
/// along rays with direction `(sin t, 0, cos t)`; `step` is the sampling
/// interval in voxels.
pub fn project(
    vol: &Volume,
    geom: &TiltGeometry,
    det_u: usize,
    det_v: usize,
    step: f64,
) -> Result<TiltSeries> {
    if det_u < 1 || det_v < 1 {
        return Err(TomoError::InvalidInput(String::from(
            "detector dimensions must be >= 1",
        )));
    }
    if !step.is_finite() || step <= 0.0 {
        return Err(TomoError::InvalidInput(String::from(
            "ray step must be > 0",
        )));
    }
    let g = vol.grid;
    let diag = math::sqrt((g.nx * g.nx + g.ny * g.ny + g.nz * g.nz) as f64);
    let half = diag / 2.0;
    // Anchor the sample lattice on the volume's z-plane coordinates so a
    // zero-tilt ray at step 1 lands exactly on every voxel plane and the
    // projection reduces to the plain z sum.
    let z_first = -(g.nz as f64 - 1.0) / 2.0;
    let k_lo = math::ceil((-half - z_first) / step) as i64;
    let k_hi = math::floor((half - z_first) / step) as i64;
    let t_first = z_first + k_lo as f64 * step;
    let n_steps = (k_hi - k_lo + 1).max(0) as usize;
    let angles: Vec<f64> = geom.angles_deg().to_vec();
    let proj_len = det_u * det_v;
    let mut data = alloc::vec![0.0f32; angles.len() * proj_len];
    par::for_each_chunk_mut(&mut data, proj_len, |tilt, out| {
        let t = math::to_radians(angles[tilt]);
        let (s, c) = (math::sin(t), math::cos(t));
        let dir = [s, 0.0, c];
        for iv in 0..det_v {
            let v = iv as f64 - (det_v as f64 - 1.0) / 2.0;
            for iu in 0..det_u {
                let u = iu as f64 - (det_u as f64 - 1.0) / 2.0;
                // ray through detector pixel (u, v), lifted into the volume
                let origin = [u * c, v, -u * s];
                let mut acc = 0.0f64;
                let mut k = 0;
                while k < n_steps {
                    let tk = t_first + k as f64 * step;
                    let p = [
                        origin[0] + tk * dir[0],
                        origin[1] + tk * dir[1],
                        origin[2] + tk * dir[2],
                    ];
                    acc += sample_volume_trilinear(vol, p);
                    k += 1;
                }
                out[iu + det_u * iv] = (acc * step) as f32;
            }
        }
    });
    TiltSeries::new(geom.clone(), det_u, det_v, data, SeriesKind::Clean)
}

/// Applies the observation noise to a clean series. Per-pixel RNG streams
/// are derived from `(seed, tilt, iu, iv)`, so parallel and serial
/// evaluation orders agree bitwise.
pub fn apply_noise(ts: &TiltSeries, nm: &NoiseModel) -> Result<TiltSeries> {
    if ts.kind != SeriesKind::Clean {
        return Err(TomoError::InvalidInput(String::from(
            "noise applies to clean series only",
        )));
    }
    match nm.kind {
        NoiseKind::None => {
            let mut out = ts.clone();
            out.kind = SeriesKind::Noisy;
            Ok(out)
        }
        NoiseKind::Gaussian => {
            let scale = nm.sigma * ts.std();
            let mut out = ts.clone();
            let (du, dv) = (ts.det_u, ts.det_v);
            let proj_len = du * dv;
            let seed = nm.seed;
            par::for_each_chunk_mut(&mut out.data, proj_len, |tilt, chunk| {
                for iv in 0..dv {
                    for iu in 0..du {
                        let mut stream =
                            Rng64::stream(seed, &[tilt as u64, iu as u64, iv as u64]);
                        let e = stream.next_normal();
                        chunk[iu + du * iv] += (scale * e) as f32;
                    }
                }
            });
            out.kind = SeriesKind::Noisy;
            Ok(out)
        }
        NoiseKind::Poisson => {
            let mut lo = f64::INFINITY;
            for &v in &ts.data {
                lo = lo.min(v as f64);
            }
            let shifted_mean = ts.mean() - lo;
            if shifted_mean <= 0.0 {
                return Err(TomoError::DegenerateDoseNormalization);
            }
            let alpha = nm.dose / shifted_mean;
            let mut out = ts.clone();
            let (du, dv) = (ts.det_u, ts.det_v);
            let proj_len = du * dv;
            let seed = nm.seed;
            let src = ts.data.clone();
            par::for_each_chunk_mut(&mut out.data, proj_len, |tilt, chunk| {
                for iv in 0..dv {
                    for iu in 0..du {
                        let idx = iu + du * iv;
                        let clean = src[tilt * proj_len + idx] as f64;
                        let lambda = alpha * (clean - lo);
                        let mut stream =
                            Rng64::stream(seed, &[tilt as u64, iu as u64, iv as u64]);
                        let counts = stream.next_poisson(lambda) as f64;
                        chunk[idx] = (counts / alpha + lo) as f32;
                    }
                }
            });
            out.kind = SeriesKind::Noisy;
            Ok(out)
        }
    }
}
