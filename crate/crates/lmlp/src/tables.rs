//! CSV emit/parse: FSC curves, training logs, and the training manifest.

use std::fs;
use std::path::{Path, PathBuf};

use lmlp_core::metrics::FscCurve;
use lmlp_core::pipeline::LogRow;

use crate::error::{Result, ToolError};

pub fn write_fsc_csv(path: &Path, curve: &FscCurve) -> Result<()> {
    let mut text = String::from("frequency,fsc,shell_count\n");
    for i in 0..curve.values.len() {
        text.push_str(&format!(
            "{:.6},{:.6},{}\n",
            curve.shell_frequencies[i], curve.values[i], curve.shell_counts[i]
        ));
    }
    fs::write(path, text).map_err(ToolError::io(path))
}

pub fn write_log_csv(path: &Path, log: &[LogRow]) -> Result<()> {
    let mut text = String::from("step,train_mse,val_mse,lr\n");
    for row in log {
        let val = row
            .val_mse
            .map(|v| format!("{v:.8}"))
            .unwrap_or_default();
        text.push_str(&format!(
            "{},{:.8},{},{:.8}\n",
            row.step, row.train_mse, val, row.lr
        ));
    }
    fs::write(path, text).map_err(ToolError::io(path))
}

/// One training pair on disk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestRow {
    pub reference: PathBuf,
    pub tilts: PathBuf,
    pub angles: PathBuf,
}

/// Parses a `reference,tilts,angles` manifest; relative paths resolve
/// against the manifest's directory.
pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRow>> {
    let text = fs::read_to_string(path).map_err(ToolError::io(path))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut lines = text.lines().enumerate();
    let header = loop {
        match lines.next() {
            Some((_, line)) if line.trim().is_empty() => continue,
            Some((_, line)) => break line.trim(),
            None => {
                return Err(ToolError::Usage(format!(
                    "{}: empty manifest",
                    path.display()
                )))
            }
        }
    };
    if header != "reference,tilts,angles" {
        return Err(ToolError::Data(format!(
            "{}: manifest header must be 'reference,tilts,angles', got '{header}'",
            path.display()
        )));
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let fields: Vec<&str> = t.split(',').map(str::trim).collect();
        if fields.len() != 3 || fields.iter().any(|f| f.is_empty()) {
            return Err(ToolError::Data(format!(
                "{}:{}: expected 3 comma-separated paths",
                path.display(),
                lineno + 1
            )));
        }
        let resolve = |f: &str| {
            let p = PathBuf::from(f);
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        };
        rows.push(ManifestRow {
            reference: resolve(fields[0]),
            tilts: resolve(fields[1]),
            angles: resolve(fields[2]),
        });
    }
    if rows.is_empty() {
        return Err(ToolError::Usage(format!(
            "{}: manifest lists no training pairs",
            path.display()
        )));
    }
    Ok(rows)
}
