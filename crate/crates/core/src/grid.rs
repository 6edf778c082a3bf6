//! Grids, volumes, tilt series, and the one geometric convention shared by
//! every other module.
//!
//! Index `(ix, iy, iz)` maps to the centered coordinate
//! `(ix - (nx-1)/2, iy - (ny-1)/2, iz - (nz-1)/2)`; detector pixels use the
//! same convention in 2D. The tilt axis is y. A point `r` projects at tilt
//! angle `theta` to the detector coordinate
//! `(r_x cos(theta) - r_z sin(theta), r_y)`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Result, TomoError};
use crate::math;

/// Voxel counts plus physical pixel size. All geometry is done in voxel
/// units; `voxel_size` is carried only as metadata.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub voxel_size: f64,
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, nz: usize, voxel_size: f64) -> Result<Self> {
        if nx < 1 || ny < 1 || nz < 1 {
            return Err(TomoError::InvalidInput(String::from(
                "grid dimensions must be >= 1",
            )));
        }
        if !voxel_size.is_finite() || voxel_size <= 0.0 {
            return Err(TomoError::InvalidInput(String::from(
                "voxel size must be positive and finite",
            )));
        }
        Ok(GridSpec {
            nx,
            ny,
            nz,
            voxel_size,
        })
    }

    pub fn cube(n: usize) -> Result<Self> {
        GridSpec::new(n, n, n, 1.0)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Centered coordinate of a voxel index.
    #[inline]
    pub fn centered(&self, ix: usize, iy: usize, iz: usize) -> [f64; 3] {
        [
            ix as f64 - (self.nx as f64 - 1.0) / 2.0,
            iy as f64 - (self.ny as f64 - 1.0) / 2.0,
            iz as f64 - (self.nz as f64 - 1.0) / 2.0,
        ]
    }

    /// Inverse of [`GridSpec::centered`]; exact for valid indices.
    #[inline]
    pub fn index_of_centered(&self, r: [f64; 3]) -> [f64; 3] {
        [
            r[0] + (self.nx as f64 - 1.0) / 2.0,
            r[1] + (self.ny as f64 - 1.0) / 2.0,
            r[2] + (self.nz as f64 - 1.0) / 2.0,
        ]
    }

    #[inline]
    pub fn flat(&self, ix: usize, iy: usize, iz: usize) -> usize {
        ix + self.nx * (iy + self.ny * iz)
    }

    #[inline]
    pub fn unflat(&self, idx: usize) -> (usize, usize, usize) {
        let ix = idx % self.nx;
        let iy = (idx / self.nx) % self.ny;
        let iz = idx / (self.nx * self.ny);
        (ix, iy, iz)
    }
}

/// Dense 3D scalar field; `x` fastest, then `y`, then `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    pub grid: GridSpec,
    pub data: Vec<f32>,
}

impl Volume {
    pub fn new(grid: GridSpec, data: Vec<f32>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(TomoError::ShapeMismatch(format!(
                "volume data length {} does not match grid {}x{}x{}",
                data.len(),
                grid.nx,
                grid.ny,
                grid.nz
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(TomoError::InvalidInput(String::from(
                "volume data contains non-finite values",
            )));
        }
        Ok(Volume { grid, data })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        let len = grid.len();
        Volume {
            grid,
            data: vec![0.0; len],
        }
    }

    pub fn filled(grid: GridSpec, value: f32) -> Self {
        let len = grid.len();
        Volume {
            grid,
            data: vec![value; len],
        }
    }

    #[inline]
    pub fn at(&self, ix: usize, iy: usize, iz: usize) -> f32 {
        self.data[self.grid.flat(ix, iy, iz)]
    }

    #[inline]
    pub fn set(&mut self, ix: usize, iy: usize, iz: usize, v: f32) {
        let idx = self.grid.flat(ix, iy, iz);
        self.data[idx] = v;
    }

    pub fn min_max(&self) -> (f32, f32) {
        let mut lo = f32::INFINITY;
        let mut hi = f32::NEG_INFINITY;
        for &v in &self.data {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }

    pub fn mean(&self) -> f64 {
        let mut acc = 0.0f64;
        for &v in &self.data {
            acc += v as f64;
        }
        acc / self.data.len() as f64
    }

    /// Population standard deviation.
    pub fn std(&self) -> f64 {
        let mean = self.mean();
        let mut acc = 0.0f64;
        for &v in &self.data {
            let d = v as f64 - mean;
            acc += d * d;
        }
        math::sqrt(acc / self.data.len() as f64)
    }
}

/// Ordered tilt angles about the y axis.
#[derive(Debug, Clone, PartialEq)]
pub struct TiltGeometry {
    angles_deg: Vec<f64>,
}

impl TiltGeometry {
    pub fn new(angles_deg: Vec<f64>) -> Result<Self> {
        if angles_deg.is_empty() {
            return Err(TomoError::InvalidInput(String::from(
                "tilt geometry needs at least one angle",
            )));
        }
        for w in angles_deg.windows(2) {
            if w[1].partial_cmp(&w[0]) != Some(core::cmp::Ordering::Greater) {
                return Err(TomoError::InvalidInput(String::from(
                    "tilt angles must be strictly increasing",
                )));
            }
        }
        for &a in &angles_deg {
            if !a.is_finite() || !(-90.0..=90.0).contains(&a) {
                return Err(TomoError::InvalidInput(format!(
                    "tilt angle {a} outside [-90, 90]"
                )));
            }
        }
        Ok(TiltGeometry { angles_deg })
    }

    /// `count` angles uniformly spaced over `[start, stop]`, both ends
    /// included. `count == 1` requires `start == stop`.
    pub fn uniform(start_deg: f64, stop_deg: f64, count: usize) -> Result<Self> {
        if count == 0 {
            return Err(TomoError::InvalidInput(String::from(
                "angle count must be >= 1",
            )));
        }
        if count == 1 {
            if start_deg != stop_deg {
                return Err(TomoError::InvalidInput(String::from(
                    "a single angle requires start == stop",
                )));
            }
            return TiltGeometry::new(vec![start_deg]);
        }
        let step = (stop_deg - start_deg) / (count - 1) as f64;
        TiltGeometry::new((0..count).map(|i| start_deg + step * i as f64).collect())
    }

    pub fn angles_deg(&self) -> &[f64] {
        &self.angles_deg
    }

    pub fn len(&self) -> usize {
        self.angles_deg.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles_deg.is_empty()
    }

    /// Rotation about y applied to a centered point:
    /// `(x cos - z sin, y, x sin + z cos)`.
    pub fn rotate(r: [f64; 3], theta_deg: f64) -> [f64; 3] {
        let t = math::to_radians(theta_deg);
        let (s, c) = (math::sin(t), math::cos(t));
        [r[0] * c - r[2] * s, r[1], r[0] * s + r[2] * c]
    }
}

/// Projection of a centered point onto the detector at a given tilt.
#[inline]
pub fn world_to_detector(r: [f64; 3], theta_deg: f64) -> [f64; 2] {
    let t = math::to_radians(theta_deg);
    let (s, c) = (math::sin(t), math::cos(t));
    [r[0] * c - r[2] * s, r[1]]
}

/// What a tilt series currently holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesKind {
    Clean,
    Noisy,
    Filtered,
}

/// Stack of 2D projections, one per tilt angle. Pixel `(iu, iv)` of tilt
/// `n` lives at `iu + det_u * (iv + det_v * n)`; `u` is the filtered axis,
/// `v` runs parallel to the tilt axis.
#[derive(Debug, Clone, PartialEq)]
pub struct TiltSeries {
    pub geometry: TiltGeometry,
    pub det_u: usize,
    pub det_v: usize,
    pub data: Vec<f32>,
    pub kind: SeriesKind,
}

impl TiltSeries {
    pub fn new(
        geometry: TiltGeometry,
        det_u: usize,
        det_v: usize,
        data: Vec<f32>,
        kind: SeriesKind,
    ) -> Result<Self> {
        if det_u < 1 || det_v < 1 {
            return Err(TomoError::InvalidInput(String::from(
                "detector dimensions must be >= 1",
            )));
        }
        if data.len() != geometry.len() * det_u * det_v {
            return Err(TomoError::ShapeMismatch(format!(
                "tilt series data length {} does not match {} tilts of {}x{}",
                data.len(),
                geometry.len(),
                det_u,
                det_v
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(TomoError::InvalidInput(String::from(
                "tilt series data contains non-finite values",
            )));
        }
        Ok(TiltSeries {
            geometry,
            det_u,
            det_v,
            data,
            kind,
        })
    }

    pub fn zeros(geometry: TiltGeometry, det_u: usize, det_v: usize, kind: SeriesKind) -> Self {
        let len = geometry.len() * det_u * det_v;
        TiltSeries {
            geometry,
            det_u,
            det_v,
            data: vec![0.0; len],
            kind,
        }
    }

    pub fn n_tilts(&self) -> usize {
        self.geometry.len()
    }

    #[inline]
    pub fn at(&self, tilt: usize, iu: usize, iv: usize) -> f32 {
        self.data[iu + self.det_u * (iv + self.det_v * tilt)]
    }

    /// One projection as a slice.
    pub fn projection(&self, tilt: usize) -> &[f32] {
        let len = self.det_u * self.det_v;
        &self.data[tilt * len..(tilt + 1) * len]
    }

    pub fn mean(&self) -> f64 {
        let mut acc = 0.0f64;
        for &v in &self.data {
            acc += v as f64;
        }
        acc / self.data.len() as f64
    }

    /// Population standard deviation over every pixel of every tilt.
    pub fn std(&self) -> f64 {
        let mean = self.mean();
        let mut acc = 0.0f64;
        for &v in &self.data {
            let d = v as f64 - mean;
            acc += d * d;
        }
        math::sqrt(acc / self.data.len() as f64)
    }

    /// Bilinear sample of one projection at a centered detector
    /// coordinate; zero outside the pixel-center hull.
    #[inline]
    pub fn bilinear(&self, tilt: usize, u: f64, v: f64) -> f64 {
        let fu = u + (self.det_u as f64 - 1.0) / 2.0;
        let fv = v + (self.det_v as f64 - 1.0) / 2.0;
        if fu < 0.0 || fv < 0.0 || fu > (self.det_u - 1) as f64 || fv > (self.det_v - 1) as f64 {
            return 0.0;
        }
        let mut u0 = fu as usize;
        let mut v0 = fv as usize;
        if u0 == self.det_u - 1 && self.det_u > 1 {
            u0 -= 1;
        }
        if v0 == self.det_v - 1 && self.det_v > 1 {
            v0 -= 1;
        }
        let du = fu - u0 as f64;
        let dv = fv - v0 as f64;
        // single-pixel axes have zero fraction; keep the upper taps in
        // bounds
        let ou = if self.det_u > 1 { 1 } else { 0 };
        let ov = if self.det_v > 1 { self.det_u } else { 0 };
        let base = self.det_u * (v0 + self.det_v * tilt) + u0;
        let p00 = self.data[base] as f64;
        let p10 = self.data[base + ou] as f64;
        let p01 = self.data[base + ov] as f64;
        let p11 = self.data[base + ou + ov] as f64;
        let a = p00 + (p10 - p00) * du;
        let b = p01 + (p11 - p01) * du;
        a + (b - a) * dv
    }
}

/// Trilinear interpolation of `v` at a centered coordinate; zero outside
/// the hull of voxel centers.
#[inline]
pub fn sample_volume_trilinear(v: &Volume, r: [f64; 3]) -> f64 {
    let g = &v.grid;
    let fx = r[0] + (g.nx as f64 - 1.0) / 2.0;
    let fy = r[1] + (g.ny as f64 - 1.0) / 2.0;
    let fz = r[2] + (g.nz as f64 - 1.0) / 2.0;
    if fx < 0.0
        || fy < 0.0
        || fz < 0.0
        || fx > (g.nx - 1) as f64
        || fy > (g.ny - 1) as f64
        || fz > (g.nz - 1) as f64
    {
        return 0.0;
    }
    let mut x0 = fx as usize;
    let mut y0 = fy as usize;
    let mut z0 = fz as usize;
    if x0 == g.nx - 1 && g.nx > 1 {
        x0 -= 1;
    }
    if y0 == g.ny - 1 && g.ny > 1 {
        y0 -= 1;
    }
    if z0 == g.nz - 1 && g.nz > 1 {
        z0 -= 1;
    }
    let dx = fx - x0 as f64;
    let dy = fy - y0 as f64;
    let dz = fz - z0 as f64;
    let (sx, sy) = (1, g.nx);
    let sz = g.nx * g.ny;
    let base = x0 + g.nx * (y0 + g.ny * z0);
    // Degenerate axes (n == 1) have zero fraction, so the upper taps
    // multiply by zero; clamp their offsets to stay in bounds.
    let ox = if g.nx > 1 { sx } else { 0 };
    let oy = if g.ny > 1 { sy } else { 0 };
    let oz = if g.nz > 1 { sz } else { 0 };
    let d = &v.data;
    let c000 = d[base] as f64;
    let c100 = d[base + ox] as f64;
    let c010 = d[base + oy] as f64;
    let c110 = d[base + ox + oy] as f64;
    let c001 = d[base + oz] as f64;
    let c101 = d[base + ox + oz] as f64;
    let c011 = d[base + oy + oz] as f64;
    let c111 = d[base + ox + oy + oz] as f64;
    let c00 = c000 + (c100 - c000) * dx;
    let c10 = c010 + (c110 - c010) * dx;
    let c01 = c001 + (c101 - c001) * dx;
    let c11 = c011 + (c111 - c011) * dx;
    let c0 = c00 + (c10 - c00) * dy;
    let c1 = c01 + (c11 - c01) * dy;
    c0 + (c1 - c0) * dz
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng64;

    #[test]
    fn world_to_detector_identity_at_zero_tilt() {
        let mut rng = Rng64::new(3);
        for _ in 0..50 {
            let r = [
                rng.next_uniform(-10.0, 10.0),
                rng.next_uniform(-10.0, 10.0),
                rng.next_uniform(-10.0, 10.0),
            ];
            let d = world_to_detector(r, 0.0);
            assert_eq!(d[0], r[0]);
            assert_eq!(d[1], r[1]);
        }
    }

    #[test]
    fn world_to_detector_examples() {
        let d = world_to_detector([5.0, 2.0, 0.0], 0.0);
        assert!((d[0] - 5.0).abs() < 1e-12 && (d[1] - 2.0).abs() < 1e-12);

        let d = world_to_detector([0.0, 3.0, 4.0], 90.0);
        assert!((d[0] - (-4.0)).abs() < 1e-12 && (d[1] - 3.0).abs() < 1e-12);

        // u = cos(60) - sin(60) evaluated independently of the production path
        let expect = 0.5 - 0.8660254037844386;
        let d = world_to_detector([1.0, 0.0, 1.0], 60.0);
        assert!((d[0] - expect).abs() < 1e-5, "{}", d[0]);
        assert!(d[1].abs() < 1e-12);
    }

    #[test]
    fn world_to_detector_is_linear_in_r() {
        let mut rng = Rng64::new(11);
        for _ in 0..50 {
            let theta = rng.next_uniform(-90.0, 90.0);
            let a = [
                rng.next_uniform(-5.0, 5.0),
                rng.next_uniform(-5.0, 5.0),
                rng.next_uniform(-5.0, 5.0),
            ];
            let b = [
                rng.next_uniform(-5.0, 5.0),
                rng.next_uniform(-5.0, 5.0),
                rng.next_uniform(-5.0, 5.0),
            ];
            let (ca, cb) = (rng.next_uniform(-2.0, 2.0), rng.next_uniform(-2.0, 2.0));
            let lhs = world_to_detector(
                [
                    ca * a[0] + cb * b[0],
                    ca * a[1] + cb * b[1],
                    ca * a[2] + cb * b[2],
                ],
                theta,
            );
            let da = world_to_detector(a, theta);
            let db = world_to_detector(b, theta);
            for i in 0..2 {
                let rhs = ca * da[i] + cb * db[i];
                assert!((lhs[i] - rhs).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn rotation_matches_detector_u_coordinate() {
        let mut rng = Rng64::new(17);
        for _ in 0..50 {
            let theta = rng.next_uniform(-90.0, 90.0);
            let r = [
                rng.next_uniform(-5.0, 5.0),
                rng.next_uniform(-5.0, 5.0),
                rng.next_uniform(-5.0, 5.0),
            ];
            let rot = TiltGeometry::rotate(r, theta);
            let det = world_to_detector(r, theta);
            assert!((rot[0] - det[0]).abs() < 1e-12);
            assert!((rot[1] - det[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn centered_index_roundtrip_is_exact() {
        let g = GridSpec::new(7, 4, 9, 1.0).unwrap();
        for ix in 0..g.nx {
            for iy in 0..g.ny {
                for iz in 0..g.nz {
                    let r = g.centered(ix, iy, iz);
                    let back = g.index_of_centered(r);
                    assert_eq!(back[0], ix as f64);
                    assert_eq!(back[1], iy as f64);
                    assert_eq!(back[2], iz as f64);
                }
            }
        }
    }

    #[test]
    fn trilinear_reproduces_stored_values_at_centers() {
        let g = GridSpec::cube(5).unwrap();
        let mut rng = Rng64::new(23);
        let data: Vec<f32> = (0..g.len()).map(|_| rng.next_f64() as f32).collect();
        let v = Volume::new(g, data).unwrap();
        for ix in 0..5 {
            for iy in 0..5 {
                for iz in 0..5 {
                    let got = sample_volume_trilinear(&v, g.centered(ix, iy, iz));
                    assert!((got - v.at(ix, iy, iz) as f64).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn trilinear_constant_volume_everywhere_inside() {
        let g = GridSpec::cube(6).unwrap();
        let v = Volume::filled(g, 2.5);
        let mut rng = Rng64::new(29);
        for _ in 0..200 {
            let r = [
                rng.next_uniform(-2.4, 2.4),
                rng.next_uniform(-2.4, 2.4),
                rng.next_uniform(-2.4, 2.4),
            ];
            assert!((sample_volume_trilinear(&v, r) - 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn trilinear_linear_ramp_midpoint() {
        // data(ix, iy, iz) = ix on an 8^3 grid; r = (0.5, 0, 0) sits at
        // fractional index 4.0 exactly.
        let g = GridSpec::cube(8).unwrap();
        let mut v = Volume::zeros(g);
        for iz in 0..8 {
            for iy in 0..8 {
                for ix in 0..8 {
                    v.set(ix, iy, iz, ix as f32);
                }
            }
        }
        let got = sample_volume_trilinear(&v, [0.5, 0.0, 0.0]);
        assert!((got - 4.0).abs() < 1e-12, "{got}");
    }

    /// Scalar reference interpolator written independently of the fast
    /// path: tent-weight sum over every voxel, valid inside the hull.
    fn trilinear_reference(v: &Volume, r: [f64; 3]) -> f64 {
        let g = &v.grid;
        let f = g.index_of_centered(r);
        let mut acc = 0.0;
        for iz in 0..g.nz {
            for iy in 0..g.ny {
                for ix in 0..g.nx {
                    let wx = 1.0 - (f[0] - ix as f64).abs();
                    let wy = 1.0 - (f[1] - iy as f64).abs();
                    let wz = 1.0 - (f[2] - iz as f64).abs();
                    if wx > 0.0 && wy > 0.0 && wz > 0.0 {
                        acc += wx * wy * wz * v.at(ix, iy, iz) as f64;
                    }
                }
            }
        }
        acc
    }

    #[test]
    fn trilinear_matches_reference_interpolator() {
        let g = GridSpec::new(6, 5, 7, 1.0).unwrap();
        let mut rng = Rng64::new(31);
        let data: Vec<f32> = (0..g.len())
            .map(|_| rng.next_uniform(-1.0, 1.0) as f32)
            .collect();
        let v = Volume::new(g, data).unwrap();
        for _ in 0..300 {
            let r = [
                rng.next_uniform(-2.49, 2.49),
                rng.next_uniform(-1.99, 1.99),
                rng.next_uniform(-2.99, 2.99),
            ];
            let fast = sample_volume_trilinear(&v, r);
            let slow = trilinear_reference(&v, r);
            assert!((fast - slow).abs() < 1e-10, "fast {fast} slow {slow}");
        }
    }

    #[test]
    fn trilinear_exact_on_trilinear_functions() {
        // f(r) = a + b x + c y + d z + e xy + f yz + g xz + h xyz is
        // reproduced exactly at interior points.
        let coef = [0.7, 1.3, -0.4, 0.9, 0.25, -0.6, 0.33, 0.11];
        let f = |x: f64, y: f64, z: f64| {
            coef[0]
                + coef[1] * x
                + coef[2] * y
                + coef[3] * z
                + coef[4] * x * y
                + coef[5] * y * z
                + coef[6] * x * z
                + coef[7] * x * y * z
        };
        let g = GridSpec::cube(9).unwrap();
        let mut v = Volume::zeros(g);
        for iz in 0..9 {
            for iy in 0..9 {
                for ix in 0..9 {
                    let r = g.centered(ix, iy, iz);
                    v.set(ix, iy, iz, f(r[0], r[1], r[2]) as f32);
                }
            }
        }
        // f64 samples of an f32 grid: tolerance reflects storage rounding
        let mut rng = Rng64::new(37);
        for _ in 0..200 {
            let r = [
                rng.next_uniform(-3.9, 3.9),
                rng.next_uniform(-3.9, 3.9),
                rng.next_uniform(-3.9, 3.9),
            ];
            let got = sample_volume_trilinear(&v, r);
            assert!((got - f(r[0], r[1], r[2])).abs() < 1e-5);
        }
    }

    #[test]
    fn trilinear_zero_outside_hull() {
        let g = GridSpec::cube(4).unwrap();
        let v = Volume::filled(g, 1.0);
        assert_eq!(sample_volume_trilinear(&v, [2.01, 0.0, 0.0]), 0.0);
        assert_eq!(sample_volume_trilinear(&v, [0.0, -2.01, 0.0]), 0.0);
        assert_eq!(sample_volume_trilinear(&v, [0.0, 0.0, 100.0]), 0.0);
        // boundary of the hull is inside
        assert!((sample_volume_trilinear(&v, [1.5, 1.5, 1.5]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn geometry_rejects_bad_angles() {
        assert!(TiltGeometry::new(vec![]).is_err());
        assert!(TiltGeometry::new(vec![0.0, 0.0]).is_err());
        assert!(TiltGeometry::new(vec![10.0, 5.0]).is_err());
        assert!(TiltGeometry::new(vec![-95.0, 0.0]).is_err());
        assert!(TiltGeometry::new(vec![-60.0, 0.0, 60.0]).is_ok());
    }

    #[test]
    fn uniform_angles_inclusive_of_both_ends() {
        let g = TiltGeometry::uniform(-60.0, 60.0, 41).unwrap();
        assert_eq!(g.len(), 41);
        assert_eq!(g.angles_deg()[0], -60.0);
        assert_eq!(g.angles_deg()[40], 60.0);
        let step = g.angles_deg()[1] - g.angles_deg()[0];
        assert!((step - 3.0).abs() < 1e-12);

        let single = TiltGeometry::uniform(0.0, 0.0, 1).unwrap();
        assert_eq!(single.angles_deg(), &[0.0]);
        assert!(TiltGeometry::uniform(0.0, 10.0, 1).is_err());
    }

    #[test]
    fn series_shape_checks() {
        let geom = TiltGeometry::uniform(-30.0, 30.0, 3).unwrap();
        assert!(TiltSeries::new(geom.clone(), 4, 4, vec![0.0; 48], SeriesKind::Clean).is_ok());
        assert!(TiltSeries::new(geom.clone(), 4, 4, vec![0.0; 47], SeriesKind::Clean).is_err());
        assert!(TiltSeries::new(geom, 0, 4, vec![], SeriesKind::Clean).is_err());
    }

    #[test]
    fn bilinear_exact_on_linear_field() {
        let geom = TiltGeometry::uniform(0.0, 0.0, 1).unwrap();
        let (du, dv) = (8, 6);
        let mut data = vec![0.0f32; du * dv];
        for iv in 0..dv {
            for iu in 0..du {
                let u = iu as f64 - (du as f64 - 1.0) / 2.0;
                let v = iv as f64 - (dv as f64 - 1.0) / 2.0;
                data[iu + du * iv] = (2.0 * u - 3.0 * v + 0.5) as f32;
            }
        }
        let ts = TiltSeries::new(geom, du, dv, data, SeriesKind::Clean).unwrap();
        let mut rng = Rng64::new(41);
        for _ in 0..200 {
            let u = rng.next_uniform(-3.4, 3.4);
            let v = rng.next_uniform(-2.4, 2.4);
            let got = ts.bilinear(0, u, v);
            let expect = 2.0 * u - 3.0 * v + 0.5;
            assert!((got - expect).abs() < 1e-5);
        }
        assert_eq!(ts.bilinear(0, 3.6, 0.0), 0.0);
    }

    #[test]
    fn bilinear_on_single_pixel_detector() {
        let geom = TiltGeometry::uniform(0.0, 0.0, 1).unwrap();
        let ts = TiltSeries::new(geom, 1, 1, vec![2.5], SeriesKind::Clean).unwrap();
        assert_eq!(ts.bilinear(0, 0.0, 0.0), 2.5);
        assert_eq!(ts.bilinear(0, 0.3, 0.0), 0.0);
    }
}
