//! Localized patch extraction and per-voxel feature assembly.
//!
//! For a voxel at centered position `r`, each tilt contributes a `P x P`
//! patch of the filtered projection sampled bilinearly on the lattice
//! `world_to_detector(r, theta) - delta * (i, j)` with
//! `i, j in {-(P-1)/2, ..., (P-1)/2}`. The feature vector concatenates
//! the patches tilt-major; within a patch the `u`-offset index `i` is the
//! row and the `v`-offset index `j` the column, flattened row-major.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Result, TomoError};
use crate::grid::{world_to_detector, SeriesKind, TiltSeries};
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalize {
    None,
    PerSeriesZscore,
}

/// Patch geometry and normalization policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchConfig {
    /// Odd patch side length.
    pub p: usize,
    /// Sampling spacing in detector pixels.
    pub delta: f64,
    pub normalize: Normalize,
}

impl Default for PatchConfig {
    fn default() -> Self {
        PatchConfig {
            p: 11,
            delta: 1.0,
            normalize: Normalize::PerSeriesZscore,
        }
    }
}

impl PatchConfig {
    pub fn new(p: usize, delta: f64, normalize: Normalize) -> Result<Self> {
        if p == 0 || p.is_multiple_of(2) {
            return Err(TomoError::InvalidInput(String::from(
                "patch size must be odd and >= 1",
            )));
        }
        if !delta.is_finite() || delta <= 0.0 {
            return Err(TomoError::InvalidInput(String::from(
                "patch spacing must be > 0",
            )));
        }
        Ok(PatchConfig { p, delta, normalize })
    }

    /// Length of the assembled feature vector for an `n_tilts` series.
    pub fn feature_dim(&self, n_tilts: usize) -> usize {
        n_tilts * self.p * self.p
    }

    /// Voxels closer than this to the volume border see zero padding in
    /// their patches; training skips them by default.
    pub fn default_margin(&self) -> usize {
        math::ceil(self.delta * (self.p as f64 - 1.0) / 2.0) as usize + 1
    }
}

/// Per-voxel feature vector: `n_tilts * P^2` values, tilt-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f32>,
}

/// One `P x P` patch from one tilt, without normalization.
pub fn extract_patch(
    ts: &TiltSeries,
    tilt_index: usize,
    r: [f64; 3],
    cfg: &PatchConfig,
) -> Result<Vec<f64>> {
    if tilt_index >= ts.n_tilts() {
        return Err(TomoError::InvalidInput(String::from(
            "tilt index out of range",
        )));
    }
    let theta = ts.geometry.angles_deg()[tilt_index];
    let det = world_to_detector(r, theta);
    let half = (cfg.p as i64 - 1) / 2;
    let mut out = vec![0.0f64; cfg.p * cfg.p];
    let mut idx = 0;
    for i in -half..=half {
        let u = det[0] - cfg.delta * i as f64;
        for j in -half..=half {
            let v = det[1] - cfg.delta * j as f64;
            out[idx] = ts.bilinear(tilt_index, u, v);
            idx += 1;
        }
    }
    Ok(out)
}

/// Assembles and normalizes features for many voxels of one series. The
/// z-score statistics are computed once at construction.
pub struct FeatureExtractor<'a> {
    ts: &'a TiltSeries,
    cfg: PatchConfig,
    /// (sin, cos) per tilt.
    trig: Vec<(f64, f64)>,
    /// affine y = (x - offset) * scale applied to every feature
    offset: f64,
    scale: f64,
}

impl<'a> FeatureExtractor<'a> {
    pub fn new(ts: &'a TiltSeries, cfg: PatchConfig) -> Result<Self> {
        if ts.kind != SeriesKind::Filtered {
            return Err(TomoError::InvalidInput(String::from(
                "feature extraction expects a filtered series",
            )));
        }
        let (offset, scale) = match cfg.normalize {
            Normalize::None => (0.0, 1.0),
            Normalize::PerSeriesZscore => {
                let std = ts.std();
                if std == 0.0 {
                    return Err(TomoError::DegenerateNormalization);
                }
                (ts.mean(), 1.0 / std)
            }
        };
        let trig = ts
            .geometry
            .angles_deg()
            .iter()
            .map(|&a| {
                let t = math::to_radians(a);
                (math::sin(t), math::cos(t))
            })
            .collect();
        Ok(FeatureExtractor {
            ts,
            cfg,
            trig,
            offset,
            scale,
        })
    }

    pub fn feature_dim(&self) -> usize {
        self.cfg.feature_dim(self.ts.n_tilts())
    }

    pub fn config(&self) -> &PatchConfig {
        &self.cfg
    }

    /// Writes the feature vector for voxel position `r` into `out`.
    pub fn features_into(&self, r: [f64; 3], out: &mut [f32]) {
        debug_assert_eq!(out.len(), self.feature_dim());
        let p = self.cfg.p;
        let half = (p as i64 - 1) / 2;
        let delta = self.cfg.delta;
        let (du, dv) = (self.ts.det_u, self.ts.det_v);
        let cu = (du as f64 - 1.0) / 2.0;
        let cv = (dv as f64 - 1.0) / 2.0;
        let span = delta * half as f64;
        let pp = p * p;
        for (tilt, &(s, c)) in self.trig.iter().enumerate() {
            let u0 = r[0] * c - r[2] * s;
            let v0 = r[1];
            let block = &mut out[tilt * pp..(tilt + 1) * pp];
            // detector-frame pixel coordinates of the patch extremes
            let fu_lo = u0 - span + cu;
            let fu_hi = u0 + span + cu;
            let fv_lo = v0 - span + cv;
            let fv_hi = v0 + span + cv;
            if p <= 64
                && fu_lo >= 0.0
                && fv_lo >= 0.0
                && fu_hi < (du - 1) as f64
                && fv_hi < (dv - 1) as f64
            {
                // whole patch interior: precompute per-offset cells and
                // weights once per axis instead of per tap
                let mut u_cells = [(0usize, 0.0f64); 64];
                let mut v_cells = [(0usize, 0.0f64); 64];
                for k in 0..p {
                    let i = k as i64 - half;
                    let fu = u0 - delta * i as f64 + cu;
                    let iu = fu as usize;
                    u_cells[k] = (iu, fu - iu as f64);
                    let fv = v0 - delta * i as f64 + cv;
                    let iv = fv as usize;
                    v_cells[k] = (iv, fv - iv as f64);
                }
                let data = &self.ts.data;
                let plane = tilt * du * dv;
                for (ki, &(iu, wu)) in u_cells.iter().take(p).enumerate() {
                    for (kj, &(iv, wv)) in v_cells.iter().take(p).enumerate() {
                        let base = plane + iv * du + iu;
                        let p00 = data[base] as f64;
                        let p10 = data[base + 1] as f64;
                        let p01 = data[base + du] as f64;
                        let p11 = data[base + du + 1] as f64;
                        let a = p00 + (p10 - p00) * wu;
                        let b = p01 + (p11 - p01) * wu;
                        let raw = a + (b - a) * wv;
                        block[ki * p + kj] = ((raw - self.offset) * self.scale) as f32;
                    }
                }
            } else {
                // patch touches the detector border: per-tap sampling
                // with the zero-outside policy
                let mut idx = 0;
                for i in -half..=half {
                    let u = u0 - delta * i as f64;
                    for j in -half..=half {
                        let v = v0 - delta * j as f64;
                        let raw = self.ts.bilinear(tilt, u, v);
                        block[idx] = ((raw - self.offset) * self.scale) as f32;
                        idx += 1;
                    }
                }
            }
        }
    }
}

/// Concatenated per-tilt patches for one voxel, normalized per config.
pub fn assemble_features(
    ts: &TiltSeries,
    r: [f64; 3],
    cfg: &PatchConfig,
) -> Result<FeatureVector> {
    let ex = FeatureExtractor::new(ts, *cfg)?;
    let mut values = vec![0.0f32; ex.feature_dim()];
    ex.features_into(r, &mut values);
    Ok(FeatureVector { values })
}
