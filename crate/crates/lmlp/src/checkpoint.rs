//! `.lmlp` model checkpoints: a small binary container holding the
//! architecture, patch configuration, tilt count, output affine, and the
//! parameter blob (32-bit little-endian floats, per layer weights
//! row-major then bias).

use std::fs;
use std::path::Path;

use lmlp_core::mlp::{Activation, MlpArch, MlpParams};
use lmlp_core::patch::{Normalize, PatchConfig};
use lmlp_core::pipeline::{OutputAffine, TrainedModel};

use crate::error::{Result, ToolError};

pub const MAGIC: &[u8; 4] = b"LMLP";
pub const VERSION: u32 = 1;

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn f32(&mut self, v: f32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    path: String,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(ToolError::Data(format!(
                "{}: short read (truncated checkpoint)",
                self.path
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn save_checkpoint(path: &Path, model: &TrainedModel) -> Result<()> {
    model.validate().map_err(ToolError::from)?;
    let arch = &model.params.arch;
    let mut w = Writer { buf: Vec::new() };
    w.buf.extend_from_slice(MAGIC);
    w.u32(VERSION);
    w.u32(arch.input_dim as u32);
    w.u32(arch.hidden.len() as u32);
    for &h in &arch.hidden {
        w.u32(h as u32);
    }
    w.u8(match arch.activation {
        Activation::Relu => 0,
        Activation::Gelu => 1,
    });
    w.u32(model.patch_cfg.p as u32);
    w.f64(model.patch_cfg.delta);
    w.u8(match model.patch_cfg.normalize {
        Normalize::None => 0,
        Normalize::PerSeriesZscore => 1,
    });
    w.u32(model.n_tilts as u32);
    w.f64(model.affine.scale);
    w.f64(model.affine.offset);
    w.u32(model.params.param_count() as u32);
    for layer in &model.params.layers {
        for &v in &layer.w {
            w.f32(v);
        }
        for &v in &layer.b {
            w.f32(v);
        }
    }
    fs::write(path, w.buf).map_err(ToolError::io(path))
}

pub fn load_checkpoint(path: &Path) -> Result<TrainedModel> {
    let bytes = fs::read(path).map_err(ToolError::io(path))?;
    let mut r = Reader {
        buf: &bytes,
        pos: 0,
        path: path.display().to_string(),
    };
    let magic = r.take(4)?;
    if magic != MAGIC {
        return Err(ToolError::Data(format!(
            "{}: not a checkpoint (bad magic)",
            path.display()
        )));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(ToolError::Data(format!(
            "{}: unsupported checkpoint version {version} (expected {VERSION})",
            path.display()
        )));
    }
    let input_dim = r.u32()? as usize;
    let n_hidden = r.u32()? as usize;
    if n_hidden > 64 {
        return Err(ToolError::Data(format!(
            "{}: implausible hidden layer count {n_hidden}",
            path.display()
        )));
    }
    let mut hidden = Vec::with_capacity(n_hidden);
    for _ in 0..n_hidden {
        hidden.push(r.u32()? as usize);
    }
    let activation = match r.u8()? {
        0 => Activation::Relu,
        1 => Activation::Gelu,
        other => {
            return Err(ToolError::Data(format!(
                "{}: unknown activation code {other}",
                path.display()
            )))
        }
    };
    let p = r.u32()? as usize;
    let delta = r.f64()?;
    let normalize = match r.u8()? {
        0 => Normalize::None,
        1 => Normalize::PerSeriesZscore,
        other => {
            return Err(ToolError::Data(format!(
                "{}: unknown normalization code {other}",
                path.display()
            )))
        }
    };
    let n_tilts = r.u32()? as usize;
    let scale = r.f64()?;
    let offset = r.f64()?;
    let param_count = r.u32()? as usize;
    let arch = MlpArch::new(input_dim, hidden, activation)
        .map_err(|e| ToolError::Data(format!("{}: {e}", path.display())))?;
    if arch.param_count() != param_count {
        return Err(ToolError::Data(format!(
            "{}: parameter count {} does not match architecture ({} expected)",
            path.display(),
            param_count,
            arch.param_count()
        )));
    }
    let mut params = MlpParams::<f32>::zeros(&arch);
    for layer in params.layers.iter_mut() {
        for v in layer.w.iter_mut() {
            *v = r.f32()?;
        }
        for v in layer.b.iter_mut() {
            *v = r.f32()?;
        }
    }
    if r.pos != bytes.len() {
        return Err(ToolError::Data(format!(
            "{}: trailing bytes after parameter blob",
            path.display()
        )));
    }
    let patch_cfg = PatchConfig::new(p, delta, normalize)
        .map_err(|e| ToolError::Data(format!("{}: {e}", path.display())))?;
    let model = TrainedModel {
        params,
        patch_cfg,
        n_tilts,
        affine: OutputAffine { scale, offset },
    };
    model
        .validate()
        .map_err(|e| ToolError::Data(format!("{}: {e}", path.display())))?;
    Ok(model)
}
