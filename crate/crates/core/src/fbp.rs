//! Filtered back-projection baseline.

use alloc::format;
use alloc::string::String;

use alloc::vec::Vec;

use crate::error::{Result, TomoError};
use crate::grid::{GridSpec, SeriesKind, TiltSeries, Volume};
use crate::math;
use crate::par;

/// Per-tilt angular weights: the local angle spacing in radians, with
/// half-gaps at the range ends. A single tilt gets the full half-circle
/// measure so backprojection of one view keeps the classical scale.
pub fn angular_weights(angles_deg: &[f64]) -> Vec<f64> {
    let n = angles_deg.len();
    if n == 1 {
        return alloc::vec![core::f64::consts::PI];
    }
    (0..n)
        .map(|i| {
            let lo = if i == 0 { angles_deg[0] } else { angles_deg[i - 1] };
            let hi = if i == n - 1 {
                angles_deg[n - 1]
            } else {
                angles_deg[i + 1]
            };
            math::to_radians(hi - lo) / 2.0
        })
        .collect()
}

/// Smears every filtered projection back across the grid:
/// `V(r) = sum_n w_n * bilinear(y_n, world_to_detector(r, theta_n))`.
pub fn backproject(ts: &TiltSeries, grid: GridSpec) -> Result<Volume> {
    if ts.kind != SeriesKind::Filtered {
        return Err(TomoError::InvalidInput(String::from(
            "backprojection expects a filtered series",
        )));
    }
    if ts.det_v != grid.ny {
        return Err(TomoError::ShapeMismatch(format!(
            "tilt axis must align: series det_v = {}, grid ny = {}",
            ts.det_v, grid.ny
        )));
    }
    let angles = ts.geometry.angles_deg();
    let weights = angular_weights(angles);
    let trig: Vec<(f64, f64, f64)> = angles
        .iter()
        .zip(weights.iter())
        .map(|(&a, &w)| {
            let t = math::to_radians(a);
            (math::sin(t), math::cos(t), w)
        })
        .collect();
    let mut out = Volume::zeros(grid);
    let slab = grid.nx * grid.ny;
    par::for_each_chunk_mut(&mut out.data, slab, |iz, plane| {
        let cz = iz as f64 - (grid.nz as f64 - 1.0) / 2.0;
        for iy in 0..grid.ny {
            let cy = iy as f64 - (grid.ny as f64 - 1.0) / 2.0;
            for ix in 0..grid.nx {
                let cx = ix as f64 - (grid.nx as f64 - 1.0) / 2.0;
                let mut acc = 0.0f64;
                for (tilt, &(s, c, w)) in trig.iter().enumerate() {
                    let u = cx * c - cz * s;
                    acc += w * ts.bilinear(tilt, u, cy);
                }
                plane[ix + grid.nx * iy] = acc as f32;
            }
        }
    });
    Ok(out)
}
