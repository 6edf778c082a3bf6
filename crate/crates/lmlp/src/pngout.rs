//! Orthoslice PNG export with percentile contrast stretch.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use lmlp_core::grid::Volume;

use crate::error::{Result, ToolError};

/// Maps values to 8-bit gray with a [p_lo, p_hi] percentile stretch.
pub fn stretch_to_u8(values: &[f32], p_lo: f64, p_hi: f64) -> Vec<u8> {
    let mut sorted: Vec<f32> = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pick = |p: f64| {
        let idx = ((sorted.len() - 1) as f64 * p / 100.0).round() as usize;
        sorted[idx] as f64
    };
    let lo = pick(p_lo);
    let hi = pick(p_hi);
    let span = (hi - lo).max(f64::MIN_POSITIVE);
    values
        .iter()
        .map(|&v| (255.0 * ((v as f64 - lo) / span).clamp(0.0, 1.0)).round() as u8)
        .collect()
}

pub fn write_gray_png(path: &Path, width: usize, height: usize, pixels: &[u8]) -> Result<()> {
    debug_assert_eq!(pixels.len(), width * height);
    let file = File::create(path).map_err(ToolError::io(path))?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), width as u32, height as u32);
    encoder.set_color(png::ColorType::Grayscale);
    encoder.set_depth(png::BitDepth::Eight);
    let mut writer = encoder
        .write_header()
        .map_err(|e| ToolError::Data(format!("{}: {e}", path.display())))?;
    writer
        .write_image_data(pixels)
        .map_err(|e| ToolError::Data(format!("{}: {e}", path.display())))?;
    Ok(())
}

/// Central xy, xz, and yz planes as 8-bit grayscale PNGs with a 1-99
/// percentile stretch. Returns the written paths.
pub fn write_orthoslices(vol: &Volume, out_dir: &Path) -> Result<[std::path::PathBuf; 3]> {
    let g = vol.grid;
    let (cx, cy, cz) = (g.nx / 2, g.ny / 2, g.nz / 2);
    let mut xy = Vec::with_capacity(g.nx * g.ny);
    for iy in 0..g.ny {
        for ix in 0..g.nx {
            xy.push(vol.at(ix, iy, cz));
        }
    }
    let mut xz = Vec::with_capacity(g.nx * g.nz);
    for iz in 0..g.nz {
        for ix in 0..g.nx {
            xz.push(vol.at(ix, cy, iz));
        }
    }
    let mut yz = Vec::with_capacity(g.ny * g.nz);
    for iz in 0..g.nz {
        for iy in 0..g.ny {
            yz.push(vol.at(cx, iy, iz));
        }
    }
    let paths = [
        out_dir.join("slice_xy.png"),
        out_dir.join("slice_xz.png"),
        out_dir.join("slice_yz.png"),
    ];
    write_gray_png(&paths[0], g.nx, g.ny, &stretch_to_u8(&xy, 1.0, 99.0))?;
    write_gray_png(&paths[1], g.nx, g.nz, &stretch_to_u8(&xz, 1.0, 99.0))?;
    write_gray_png(&paths[2], g.ny, g.nz, &stretch_to_u8(&yz, 1.0, 99.0))?;
    Ok(paths)
}
