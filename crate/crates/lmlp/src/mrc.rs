//! MRC2014 subset: mode-2 (32-bit real) volumes and image stacks, plus
//! the plain-text `.tlt` tilt-angle sidecar.
//!
//! Files are always written little-endian with the standard machine
//! stamp; big-endian-stamped files are byte-swapped on read. Only mode 2
//! is accepted.

use std::fs;
use std::path::Path;

use lmlp_core::grid::{GridSpec, SeriesKind, TiltGeometry, TiltSeries, Volume};

use crate::error::{Result, ToolError};

pub const HEADER_LEN: usize = 1024;
const MODE_FLOAT32: i32 = 2;

/// Raw decoded contents of an MRC file.
#[derive(Debug)]
pub struct MrcData {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub voxel_size: f64,
    pub data: Vec<f32>,
}

fn put_i32(buf: &mut [u8], offset: usize, v: i32) {
    buf[offset..offset + 4].copy_from_slice(&v.to_le_bytes());
}

fn put_f32(buf: &mut [u8], offset: usize, v: f32) {
    buf[offset..offset + 4].copy_from_slice(&v.to_le_bytes());
}

fn get_i32(buf: &[u8], offset: usize, swap: bool) -> i32 {
    let raw: [u8; 4] = buf[offset..offset + 4].try_into().unwrap();
    let v = i32::from_le_bytes(raw);
    if swap {
        v.swap_bytes()
    } else {
        v
    }
}

fn get_f32(buf: &[u8], offset: usize, swap: bool) -> f32 {
    let raw: [u8; 4] = buf[offset..offset + 4].try_into().unwrap();
    if swap {
        f32::from_be_bytes(raw)
    } else {
        f32::from_le_bytes(raw)
    }
}

fn build_header(
    nx: usize,
    ny: usize,
    nz: usize,
    voxel_size: f64,
    is_volume: bool,
    data: &[f32],
) -> Vec<u8> {
    let mut h = vec![0u8; HEADER_LEN];
    put_i32(&mut h, 0, nx as i32);
    put_i32(&mut h, 4, ny as i32);
    put_i32(&mut h, 8, nz as i32);
    put_i32(&mut h, 12, MODE_FLOAT32);
    // mx, my, mz: sampling grid equals the stored grid
    put_i32(&mut h, 28, nx as i32);
    put_i32(&mut h, 32, ny as i32);
    put_i32(&mut h, 36, nz as i32);
    // cell dimensions in angstroms
    put_f32(&mut h, 40, (nx as f64 * voxel_size) as f32);
    put_f32(&mut h, 44, (ny as f64 * voxel_size) as f32);
    put_f32(&mut h, 48, (nz as f64 * voxel_size) as f32);
    put_f32(&mut h, 52, 90.0);
    put_f32(&mut h, 56, 90.0);
    put_f32(&mut h, 60, 90.0);
    // axis order x, y, z
    put_i32(&mut h, 64, 1);
    put_i32(&mut h, 68, 2);
    put_i32(&mut h, 72, 3);
    // statistics
    let mut lo = f32::INFINITY;
    let mut hi = f32::NEG_INFINITY;
    let mut mean = 0.0f64;
    for &v in data {
        lo = lo.min(v);
        hi = hi.max(v);
        mean += v as f64;
    }
    mean /= data.len().max(1) as f64;
    let mut rms = 0.0f64;
    for &v in data {
        let d = v as f64 - mean;
        rms += d * d;
    }
    rms = (rms / data.len().max(1) as f64).sqrt();
    put_f32(&mut h, 76, lo);
    put_f32(&mut h, 80, hi);
    put_f32(&mut h, 84, mean as f32);
    // ispg: 1 = volume, 0 = image stack
    put_i32(&mut h, 88, if is_volume { 1 } else { 0 });
    h[208..212].copy_from_slice(b"MAP ");
    // little-endian machine stamp
    h[212] = 0x44;
    h[213] = 0x44;
    put_f32(&mut h, 216, rms as f32);
    h
}

fn write_mrc_bytes(
    path: &Path,
    nx: usize,
    ny: usize,
    nz: usize,
    voxel_size: f64,
    is_volume: bool,
    data: &[f32],
) -> Result<()> {
    debug_assert_eq!(data.len(), nx * ny * nz);
    let mut bytes = build_header(nx, ny, nz, voxel_size, is_volume, data);
    bytes.reserve(data.len() * 4);
    for &v in data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes).map_err(ToolError::io(path))
}

/// Reads any supported MRC file into raw dimensions plus data.
pub fn read_mrc(path: &Path) -> Result<MrcData> {
    let bytes = fs::read(path).map_err(ToolError::io(path))?;
    if bytes.len() < HEADER_LEN {
        return Err(ToolError::Data(format!(
            "{}: short read (file smaller than the 1024-byte header)",
            path.display()
        )));
    }
    // byte 212 of the machine stamp: 0x11 marks big-endian writers
    let swap = bytes[212] == 0x11;
    let nx = get_i32(&bytes, 0, swap);
    let ny = get_i32(&bytes, 4, swap);
    let nz = get_i32(&bytes, 8, swap);
    let mode = get_i32(&bytes, 12, swap);
    if mode != MODE_FLOAT32 {
        return Err(ToolError::Data(format!(
            "{}: unsupported MRC mode {mode} (only mode 2 is supported)",
            path.display()
        )));
    }
    if nx < 1 || ny < 1 || nz < 1 {
        return Err(ToolError::Data(format!(
            "{}: non-positive dimensions {nx}x{ny}x{nz}",
            path.display()
        )));
    }
    let (nx, ny, nz) = (nx as usize, ny as usize, nz as usize);
    let count = nx * ny * nz;
    let need = HEADER_LEN + 4 * count;
    if bytes.len() < need {
        return Err(ToolError::Data(format!(
            "{}: short read ({} bytes, need {need})",
            path.display(),
            bytes.len()
        )));
    }
    let mx = get_i32(&bytes, 28, swap);
    let cella_x = get_f32(&bytes, 40, swap);
    let voxel_size = if mx > 0 && cella_x > 0.0 {
        cella_x as f64 / mx as f64
    } else {
        1.0
    };
    let mut data = Vec::with_capacity(count);
    for i in 0..count {
        data.push(get_f32(&bytes, HEADER_LEN + 4 * i, swap));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(ToolError::Data(format!(
            "{}: non-finite voxel values",
            path.display()
        )));
    }
    Ok(MrcData {
        nx,
        ny,
        nz,
        voxel_size,
        data,
    })
}

pub fn write_volume(path: &Path, vol: &Volume) -> Result<()> {
    let g = vol.grid;
    write_mrc_bytes(path, g.nx, g.ny, g.nz, g.voxel_size, true, &vol.data)
}

pub fn read_volume(path: &Path) -> Result<Volume> {
    let raw = read_mrc(path)?;
    let grid = GridSpec::new(raw.nx, raw.ny, raw.nz, raw.voxel_size)
        .map_err(|e| ToolError::Data(format!("{}: {e}", path.display())))?;
    Volume::new(grid, raw.data).map_err(|e| ToolError::Data(format!("{}: {e}", path.display())))
}

/// Writes the projections as a stack (`nz` = tilt count) and the angles
/// as a `.tlt` sidecar next to it.
pub fn write_stack(path: &Path, ts: &TiltSeries, voxel_size: f64) -> Result<()> {
    write_mrc_bytes(
        path,
        ts.det_u,
        ts.det_v,
        ts.n_tilts(),
        voxel_size,
        false,
        &ts.data,
    )
}

pub fn write_tlt(path: &Path, angles_deg: &[f64]) -> Result<()> {
    let mut text = String::new();
    for a in angles_deg {
        text.push_str(&format!("{a:.4}\n"));
    }
    fs::write(path, text).map_err(ToolError::io(path))
}

pub fn read_tlt(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| ToolError::Io {
        path: path.to_path_buf(),
        source: std::io::Error::new(
            e.kind(),
            format!("tilt-angle sidecar required: {e}"),
        ),
    })?;
    let mut angles = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let a: f64 = t.parse().map_err(|_| {
            ToolError::Data(format!(
                "{}:{}: not an angle: '{t}'",
                path.display(),
                lineno + 1
            ))
        })?;
        angles.push(a);
    }
    if angles.is_empty() {
        return Err(ToolError::Data(format!(
            "{}: no angles found",
            path.display()
        )));
    }
    Ok(angles)
}

/// Reads a projection stack plus its angle sidecar into a tilt series.
/// Data from disk is treated as (potentially) noisy measurements.
pub fn read_stack(mrc_path: &Path, tlt_path: &Path) -> Result<TiltSeries> {
    let raw = read_mrc(mrc_path)?;
    let angles = read_tlt(tlt_path)?;
    if angles.len() != raw.nz {
        return Err(ToolError::Data(format!(
            "{}: stack holds {} images but {} lists {} angles",
            mrc_path.display(),
            raw.nz,
            tlt_path.display(),
            angles.len()
        )));
    }
    let geometry = TiltGeometry::new(angles)
        .map_err(|e| ToolError::Data(format!("{}: {e}", tlt_path.display())))?;
    TiltSeries::new(geometry, raw.nx, raw.ny, raw.data, SeriesKind::Noisy)
        .map_err(|e| ToolError::Data(format!("{}: {e}", mrc_path.display())))
}
