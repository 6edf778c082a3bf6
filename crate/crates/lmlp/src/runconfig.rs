//! JSON run configuration mirroring every module's config type. Unknown
//! keys are rejected; command-line flags override file values; every run
//! writes its fully resolved configuration next to the outputs.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use lmlp_core::filtering::{FilterKind, FilterSpec};
use lmlp_core::grid::GridSpec;
use lmlp_core::mlp::{Activation, MlpArch};
use lmlp_core::patch::{Normalize, PatchConfig};
use lmlp_core::phantom::{BlobKind, PhantomSpec};
use lmlp_core::pipeline::{LrSchedule, TrainConfig};
use lmlp_core::projector::NoiseModel;

use crate::error::{Result, ToolError};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct GridCfg {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub voxel_size: f64,
}

impl Default for GridCfg {
    fn default() -> Self {
        GridCfg {
            nx: 64,
            ny: 64,
            nz: 64,
            voxel_size: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct PhantomCfg {
    pub seed: u64,
    pub n_blobs: usize,
    /// ellipsoid | shell | rod
    pub blob_kind: String,
    pub density_lo: f64,
    pub density_hi: f64,
    pub background: f64,
}

impl Default for PhantomCfg {
    fn default() -> Self {
        PhantomCfg {
            seed: 0,
            n_blobs: 6,
            blob_kind: "ellipsoid".into(),
            density_lo: 0.5,
            density_hi: 1.0,
            background: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseCfg {
    /// none | gaussian | poisson
    pub kind: String,
    pub sigma: f64,
    pub dose: f64,
    pub seed: u64,
}

impl Default for NoiseCfg {
    fn default() -> Self {
        NoiseCfg {
            kind: "gaussian".into(),
            sigma: 0.5,
            dose: 400.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ProjectionCfg {
    pub det_u: Option<usize>,
    pub det_v: Option<usize>,
    /// ray sampling interval in voxels
    pub step: f64,
}

impl Default for ProjectionCfg {
    fn default() -> Self {
        ProjectionCfg {
            det_u: None,
            det_v: None,
            step: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct FilterCfg {
    /// ramlak | hann
    pub kind: String,
    pub pad_factor: usize,
}

impl Default for FilterCfg {
    fn default() -> Self {
        FilterCfg {
            kind: "ramlak".into(),
            pad_factor: 2,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct PatchCfg {
    pub p: usize,
    pub delta: f64,
    /// none | zscore
    pub normalize: String,
}

impl Default for PatchCfg {
    fn default() -> Self {
        PatchCfg {
            p: 11,
            delta: 1.0,
            normalize: "zscore".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct MlpCfg {
    pub hidden: Vec<usize>,
    /// relu | gelu
    pub activation: String,
}

impl Default for MlpCfg {
    fn default() -> Self {
        MlpCfg {
            hidden: vec![512, 512, 256, 128],
            activation: "relu".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct TrainCfg {
    pub steps: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// constant | cosine
    pub lr_schedule: String,
    pub seed: u64,
    pub val_fraction: f64,
    /// border exclusion in voxels; omitted = derived from the patch size
    pub margin: Option<usize>,
    pub normalize_targets: bool,
}

impl Default for TrainCfg {
    fn default() -> Self {
        TrainCfg {
            steps: 20_000,
            batch_size: 1024,
            lr: 1e-4,
            lr_schedule: "constant".into(),
            seed: 0,
            val_fraction: 0.05,
            margin: None,
            normalize_targets: true,
        }
    }
}

/// The complete run configuration; sections mirror the library's config
/// types one to one.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub grid: GridCfg,
    pub phantom: PhantomCfg,
    pub noise: NoiseCfg,
    pub projection: ProjectionCfg,
    pub filter: FilterCfg,
    pub patch: PatchCfg,
    pub mlp: MlpCfg,
    pub train: TrainCfg,
    /// tool version stamped into resolved configs on write
    pub version: Option<String>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(ToolError::io(path))?;
        serde_json::from_str(&text)
            .map_err(|e| ToolError::Data(format!("{}: {e}", path.display())))
    }

    /// Writes the fully resolved config (with the tool version) next to a
    /// run's outputs.
    pub fn write_resolved(&self, path: &Path) -> Result<()> {
        let mut resolved = self.clone();
        resolved.version = Some(env!("CARGO_PKG_VERSION").to_string());
        let text = serde_json::to_string_pretty(&resolved)
            .map_err(|e| ToolError::Data(format!("{}: {e}", path.display())))?;
        fs::write(path, text + "\n").map_err(ToolError::io(path))
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        GridSpec::new(
            self.grid.nx,
            self.grid.ny,
            self.grid.nz,
            self.grid.voxel_size,
        )
        .map_err(Into::into)
    }

    pub fn phantom_spec(&self) -> Result<PhantomSpec> {
        let kind = match self.phantom.blob_kind.as_str() {
            "ellipsoid" => BlobKind::Ellipsoid,
            "shell" => BlobKind::Shell,
            "rod" => BlobKind::Rod,
            other => {
                return Err(ToolError::Usage(format!(
                    "unknown blob kind '{other}' (ellipsoid | shell | rod)"
                )))
            }
        };
        Ok(PhantomSpec {
            grid: self.grid_spec()?,
            seed: self.phantom.seed,
            n_blobs: self.phantom.n_blobs,
            blob_kind: kind,
            density_range: [self.phantom.density_lo, self.phantom.density_hi],
            background: self.phantom.background,
        })
    }

    pub fn noise_model(&self) -> Result<NoiseModel> {
        parse_noise(&self.noise.kind, self.noise.sigma, self.noise.dose, self.noise.seed)
    }

    pub fn filter_spec(&self) -> Result<FilterSpec> {
        let kind = match self.filter.kind.as_str() {
            "ramlak" => FilterKind::RamLak,
            "hann" => FilterKind::HannRamLak,
            other => {
                return Err(ToolError::Usage(format!(
                    "unknown filter kind '{other}' (ramlak | hann)"
                )))
            }
        };
        FilterSpec::new(kind, self.filter.pad_factor).map_err(Into::into)
    }

    pub fn patch_config(&self) -> Result<PatchConfig> {
        let normalize = match self.patch.normalize.as_str() {
            "none" => Normalize::None,
            "zscore" => Normalize::PerSeriesZscore,
            other => {
                return Err(ToolError::Usage(format!(
                    "unknown patch normalization '{other}' (none | zscore)"
                )))
            }
        };
        PatchConfig::new(self.patch.p, self.patch.delta, normalize).map_err(Into::into)
    }

    pub fn train_config(&self, n_tilts: usize) -> Result<TrainConfig> {
        let patch_cfg = self.patch_config()?;
        let activation = match self.mlp.activation.as_str() {
            "relu" => Activation::Relu,
            "gelu" => Activation::Gelu,
            other => {
                return Err(ToolError::Usage(format!(
                    "unknown activation '{other}' (relu | gelu)"
                )))
            }
        };
        let arch = MlpArch::new(
            patch_cfg.feature_dim(n_tilts),
            self.mlp.hidden.clone(),
            activation,
        )?;
        let schedule = match self.train.lr_schedule.as_str() {
            "constant" => LrSchedule::Constant,
            "cosine" => LrSchedule::CosineDecay,
            other => {
                return Err(ToolError::Usage(format!(
                    "unknown lr schedule '{other}' (constant | cosine)"
                )))
            }
        };
        let mut cfg = TrainConfig::new(patch_cfg, arch);
        cfg.steps = self.train.steps;
        cfg.batch_size = self.train.batch_size;
        cfg.lr = self.train.lr;
        cfg.lr_schedule = schedule;
        cfg.seed = self.train.seed;
        cfg.val_fraction = self.train.val_fraction;
        if let Some(m) = self.train.margin {
            cfg.margin = m;
        }
        cfg.normalize_targets = self.train.normalize_targets;
        Ok(cfg)
    }
}

/// Parses a `kind[:param]` noise flag, e.g. `gaussian:0.5`, `poisson:400`,
/// `none`.
pub fn parse_noise(kind: &str, default_sigma: f64, default_dose: f64, seed: u64) -> Result<NoiseModel> {
    let (name, param) = match kind.split_once(':') {
        Some((n, p)) => (n, Some(p)),
        None => (kind, None),
    };
    let parse_param = |p: Option<&str>, fallback: f64, what: &str| -> Result<f64> {
        match p {
            None => Ok(fallback),
            Some(text) => text.parse().map_err(|_| {
                ToolError::Usage(format!("bad {what} value '{text}' in noise spec"))
            }),
        }
    };
    match name {
        "none" => Ok(NoiseModel::none()),
        "gaussian" => {
            let sigma = parse_param(param, default_sigma, "sigma")?;
            NoiseModel::gaussian(sigma, seed).map_err(Into::into)
        }
        "poisson" => {
            let dose = parse_param(param, default_dose, "dose")?;
            NoiseModel::poisson(dose, seed).map_err(Into::into)
        }
        other => Err(ToolError::Usage(format!(
            "unknown noise kind '{other}' (none | gaussian[:sigma] | poisson[:dose])"
        ))),
    }
}

/// Parses an inclusive `start:stop:count` angle range.
pub fn parse_angles(spec: &str) -> Result<(f64, f64, usize)> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(ToolError::Usage(format!(
            "angle spec '{spec}' must be start:stop:count"
        )));
    }
    let start: f64 = parts[0]
        .parse()
        .map_err(|_| ToolError::Usage(format!("bad angle start '{}'", parts[0])))?;
    let stop: f64 = parts[1]
        .parse()
        .map_err(|_| ToolError::Usage(format!("bad angle stop '{}'", parts[1])))?;
    let count: usize = parts[2]
        .parse()
        .map_err(|_| ToolError::Usage(format!("bad angle count '{}'", parts[2])))?;
    Ok((start, stop, count))
}
