//! Supervised training over (reference volume, filtered tilt series)
//! pairs, and voxel-wise reconstruction with the trained network.
//!
//! Training draws uniform (pair, voxel) samples, assembles patch features,
//! and runs Adam on the mean squared error against the reference density.
//! Gradient computation fans out over fixed-size batch shards whose
//! results are reduced in shard order, so a run is bit-reproducible for
//! any worker count.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Result, TomoError};
use crate::filtering::{ramp_filter, FilterSpec};
use crate::grid::{GridSpec, SeriesKind, TiltSeries, Volume};
use crate::math;
use crate::mlp::{
    adam_step, backward_batch_sum, AdamState, MlpArch, MlpParams, Workspace,
};
use crate::par;
use crate::patch::{FeatureExtractor, PatchConfig};
use crate::rng::Rng64;

/// Samples per gradient shard. Fixed (not derived from the worker count)
/// so parallel and serial runs reduce identically.
const GRAD_SHARD: usize = 32;
/// Validation MSE is evaluated every this many steps.
const VAL_EVERY: usize = 100;
/// At most this many held-out voxels are scored per pair; enough for
/// model selection while keeping evaluation off the critical path.
const VAL_CAP_PER_PAIR: usize = 256;

const SALT_VAL: u64 = 0x56414c5f53414c54;
const SALT_DRAW: u64 = 0x445241575f53414c;
const SALT_INIT: u64 = 0x494e49545f53414c;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LrSchedule {
    Constant,
    CosineDecay,
}

/// Everything the trainer needs besides the data.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub patch_cfg: PatchConfig,
    pub arch: MlpArch,
    pub steps: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub lr_schedule: LrSchedule,
    pub seed: u64,
    /// Fraction of interior voxels held out for validation, in [0, 1).
    pub val_fraction: f64,
    /// Voxels this close to the volume border are never sampled.
    pub margin: usize,
    /// Z-score targets per reference volume; the mean affine is stored in
    /// the model so reconstructions map back to density units.
    pub normalize_targets: bool,
}

impl TrainConfig {
    pub fn new(patch_cfg: PatchConfig, arch: MlpArch) -> Self {
        let margin = patch_cfg.default_margin();
        TrainConfig {
            patch_cfg,
            arch,
            steps: 20_000,
            batch_size: 1024,
            lr: 1e-4,
            lr_schedule: LrSchedule::Constant,
            seed: 0,
            val_fraction: 0.05,
            margin,
            normalize_targets: true,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.steps < 1 {
            return Err(TomoError::InvalidInput(String::from("steps must be >= 1")));
        }
        if self.batch_size < 1 {
            return Err(TomoError::InvalidInput(String::from(
                "batch size must be >= 1",
            )));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(TomoError::InvalidInput(String::from(
                "validation fraction must be in [0, 1)",
            )));
        }
        if !self.lr.is_finite() || self.lr <= 0.0 {
            return Err(TomoError::InvalidInput(String::from(
                "learning rate must be > 0",
            )));
        }
        Ok(())
    }
}

/// One supervised example: a reference volume and the filtered
/// measurements it should be recovered from.
#[derive(Debug, Clone)]
pub struct TrainingPair {
    pub reference: Volume,
    pub measurements: TiltSeries,
    pub id: String,
}

impl TrainingPair {
    pub fn new(reference: Volume, measurements: TiltSeries, id: String) -> Result<Self> {
        if measurements.kind != SeriesKind::Filtered {
            return Err(TomoError::InvalidInput(format!(
                "pair '{id}': measurements must be ramp filtered"
            )));
        }
        if measurements.det_v != reference.grid.ny {
            return Err(TomoError::ShapeMismatch(format!(
                "pair '{id}': series det_v = {} but reference ny = {}",
                measurements.det_v, reference.grid.ny
            )));
        }
        Ok(TrainingPair {
            reference,
            measurements,
            id,
        })
    }
}

/// Maps raw network output to density units: `density = scale * f + offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutputAffine {
    pub scale: f64,
    pub offset: f64,
}

impl OutputAffine {
    pub fn identity() -> Self {
        OutputAffine {
            scale: 1.0,
            offset: 0.0,
        }
    }
}

/// Trained network plus the metadata needed to run it on new series.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub params: MlpParams<f32>,
    pub patch_cfg: PatchConfig,
    pub n_tilts: usize,
    pub affine: OutputAffine,
}

impl TrainedModel {
    pub fn validate(&self) -> Result<()> {
        let expect = self.patch_cfg.feature_dim(self.n_tilts);
        if self.params.arch.input_dim != expect {
            return Err(TomoError::ShapeMismatch(format!(
                "network input dimension {} does not match {} tilts x {}^2 patch = {}",
                self.params.arch.input_dim, self.n_tilts, self.patch_cfg.p, expect
            )));
        }
        Ok(())
    }
}

/// One row of the training log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRow {
    pub step: usize,
    pub train_mse: f64,
    pub val_mse: Option<f64>,
    pub lr: f64,
}

/// Where a minibatch sample came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleRef {
    pub pair: usize,
    pub voxel: [usize; 3],
}

/// A drawn minibatch: `batch` rows of `feature_dim` values plus targets.
#[derive(Debug, Clone)]
pub struct MiniBatch {
    pub feature_dim: usize,
    pub features: Vec<f32>,
    pub targets: Vec<f32>,
    pub samples: Vec<SampleRef>,
}

/// Per-pair precomputation shared by sampling, training, and validation.
struct TrainContext<'a> {
    pairs: &'a [TrainingPair],
    extractors: Vec<FeatureExtractor<'a>>,
    /// (mean, std) of each reference volume
    target_stats: Vec<(f64, f64)>,
    cfg: &'a TrainConfig,
    feature_dim: usize,
}

impl<'a> TrainContext<'a> {
    fn new(pairs: &'a [TrainingPair], cfg: &'a TrainConfig) -> Result<Self> {
        cfg.validate()?;
        if pairs.is_empty() {
            return Err(TomoError::InvalidInput(String::from(
                "training needs at least one pair",
            )));
        }
        let n = pairs[0].measurements.n_tilts();
        let (du, dv) = (pairs[0].measurements.det_u, pairs[0].measurements.det_v);
        for p in pairs {
            if p.measurements.n_tilts() != n {
                return Err(TomoError::ShapeMismatch(format!(
                    "pair '{}' has {} tilts, expected {}",
                    p.id,
                    p.measurements.n_tilts(),
                    n
                )));
            }
            if (p.measurements.det_u, p.measurements.det_v) != (du, dv) {
                return Err(TomoError::ShapeMismatch(format!(
                    "pair '{}' detector {}x{} differs from {}x{}",
                    p.id, p.measurements.det_u, p.measurements.det_v, du, dv
                )));
            }
        }
        let feature_dim = cfg.patch_cfg.feature_dim(n);
        if cfg.arch.input_dim != feature_dim {
            return Err(TomoError::ShapeMismatch(format!(
                "network input dimension {} does not match {} tilts x {}^2 patch = {}",
                cfg.arch.input_dim, n, cfg.patch_cfg.p, feature_dim
            )));
        }
        for p in pairs {
            let g = p.reference.grid;
            for (dim, name) in [(g.nx, "x"), (g.ny, "y"), (g.nz, "z")] {
                if dim <= 2 * cfg.margin {
                    return Err(TomoError::InvalidInput(format!(
                        "margin {} leaves no interior voxels along {} (n = {})",
                        cfg.margin, name, dim
                    )));
                }
            }
        }
        let mut extractors = Vec::with_capacity(pairs.len());
        let mut target_stats = Vec::with_capacity(pairs.len());
        for p in pairs {
            extractors.push(FeatureExtractor::new(&p.measurements, cfg.patch_cfg)?);
            let (mean, std) = (p.reference.mean(), p.reference.std());
            if cfg.normalize_targets && std == 0.0 {
                return Err(TomoError::InvalidInput(format!(
                    "pair '{}': constant reference cannot be target-normalized",
                    p.id
                )));
            }
            target_stats.push((mean, std));
        }
        Ok(TrainContext {
            pairs,
            extractors,
            target_stats,
            cfg,
            feature_dim,
        })
    }

    fn is_validation(&self, pair: usize, flat: usize) -> bool {
        let g = self.pairs[pair].reference.grid;
        let voxel = {
            let (ix, iy, iz) = g.unflat(flat);
            [ix, iy, iz]
        };
        is_validation_voxel(self.cfg, pair, g, voxel)
    }

    fn target(&self, pair: usize, ix: usize, iy: usize, iz: usize) -> f32 {
        let raw = self.pairs[pair].reference.at(ix, iy, iz) as f64;
        if self.cfg.normalize_targets {
            let (mean, std) = self.target_stats[pair];
            ((raw - mean) / std) as f32
        } else {
            raw as f32
        }
    }

    /// Draws one training sample, skipping validation voxels.
    fn draw(&self, rng: &mut Rng64) -> Result<SampleRef> {
        let m = self.cfg.margin;
        for _ in 0..100_000 {
            let pair = rng.next_range(self.pairs.len());
            let g = self.pairs[pair].reference.grid;
            let ix = m + rng.next_range(g.nx - 2 * m);
            let iy = m + rng.next_range(g.ny - 2 * m);
            let iz = m + rng.next_range(g.nz - 2 * m);
            if !self.is_validation(pair, g.flat(ix, iy, iz)) {
                return Ok(SampleRef {
                    pair,
                    voxel: [ix, iy, iz],
                });
            }
        }
        Err(TomoError::InvalidInput(String::from(
            "validation fraction leaves too few training voxels",
        )))
    }

    fn fill_batch(
        &self,
        rng: &mut Rng64,
        features: &mut Vec<f32>,
        targets: &mut Vec<f32>,
        samples: Option<&mut Vec<SampleRef>>,
    ) -> Result<()> {
        let b = self.cfg.batch_size;
        features.clear();
        features.resize(b * self.feature_dim, 0.0);
        targets.clear();
        // draws consume the rng serially; feature assembly fans out over
        // disjoint rows
        let mut refs = Vec::with_capacity(b);
        for _ in 0..b {
            let s = self.draw(rng)?;
            targets.push(self.target(s.pair, s.voxel[0], s.voxel[1], s.voxel[2]));
            refs.push(s);
        }
        let dim = self.feature_dim;
        par::for_each_chunk_mut(features, dim, |i, row| {
            let s = refs[i];
            let g = self.pairs[s.pair].reference.grid;
            let r = g.centered(s.voxel[0], s.voxel[1], s.voxel[2]);
            self.extractors[s.pair].features_into(r, row);
        });
        if let Some(out) = samples {
            *out = refs;
        }
        Ok(())
    }

    /// Deterministic held-out voxel list, capped per pair.
    fn validation_set(&self) -> Vec<SampleRef> {
        let mut out = Vec::new();
        if self.cfg.val_fraction <= 0.0 {
            return out;
        }
        let m = self.cfg.margin;
        for (pair, p) in self.pairs.iter().enumerate() {
            let g = p.reference.grid;
            let mut candidates = Vec::new();
            for iz in m..g.nz - m {
                for iy in m..g.ny - m {
                    for ix in m..g.nx - m {
                        if self.is_validation(pair, g.flat(ix, iy, iz)) {
                            candidates.push(SampleRef {
                                pair,
                                voxel: [ix, iy, iz],
                            });
                        }
                    }
                }
            }
            if candidates.len() > VAL_CAP_PER_PAIR {
                let stride = candidates.len() / VAL_CAP_PER_PAIR;
                out.extend(candidates.into_iter().step_by(stride).take(VAL_CAP_PER_PAIR));
            } else {
                out.extend(candidates);
            }
        }
        out
    }

    fn validation_mse(&self, params: &MlpParams<f32>, set: &[SampleRef]) -> f64 {
        if set.is_empty() {
            return f64::NAN;
        }
        let dim = self.feature_dim;
        let shards = set.len().div_ceil(GRAD_SHARD);
        let partials = par::map_indexed(shards, |s| {
            let lo = s * GRAD_SHARD;
            let hi = (lo + GRAD_SHARD).min(set.len());
            let mut ws = Workspace::<f32>::new(&params.arch);
            let mut row = vec![0.0f32; dim];
            let mut acc = 0.0f64;
            for sref in &set[lo..hi] {
                let g = self.pairs[sref.pair].reference.grid;
                let r = g.centered(sref.voxel[0], sref.voxel[1], sref.voxel[2]);
                self.extractors[sref.pair].features_into(r, &mut row);
                let pred = forward_with_ws(params, &row, &mut ws);
                let t = self.target(sref.pair, sref.voxel[0], sref.voxel[1], sref.voxel[2]);
                let d = pred as f64 - t as f64;
                acc += d * d;
            }
            acc
        });
        partials.iter().sum::<f64>() / set.len() as f64
    }
}

fn forward_with_ws(params: &MlpParams<f32>, input: &[f32], ws: &mut Workspace<f32>) -> f32 {
    // mlp::mlp_forward allocates a workspace per call; training and
    // reconstruction reuse one through this thin wrapper
    crate::mlp::forward_reusing(params, input, ws)
}

/// Uniformly samples `(pair, voxel)` training examples and assembles their
/// features and targets. Deterministic in the rng state.
pub fn sample_minibatch(
    pairs: &[TrainingPair],
    cfg: &TrainConfig,
    rng: &mut Rng64,
) -> Result<MiniBatch> {
    let ctx = TrainContext::new(pairs, cfg)?;
    let mut features = Vec::new();
    let mut targets = Vec::new();
    let mut samples = Vec::new();
    ctx.fill_batch(rng, &mut features, &mut targets, Some(&mut samples))?;
    Ok(MiniBatch {
        feature_dim: ctx.feature_dim,
        features,
        targets,
        samples,
    })
}

fn lr_at(cfg: &TrainConfig, step: usize) -> f64 {
    match cfg.lr_schedule {
        LrSchedule::Constant => cfg.lr,
        LrSchedule::CosineDecay => {
            let t = (step - 1) as f64 / cfg.steps as f64;
            cfg.lr * 0.5 * (1.0 + math::cos(core::f64::consts::PI * t))
        }
    }
}

/// Sharded gradient step: sums per-shard gradients in shard order and
/// normalizes by the batch size. Returns the batch MSE.
fn sharded_backward(
    params: &MlpParams<f32>,
    features: &[f32],
    targets: &[f32],
    dim: usize,
) -> Result<(f64, MlpParams<f32>)> {
    let batch = targets.len();
    let shards = batch.div_ceil(GRAD_SHARD);
    let partials: Vec<Result<(f32, MlpParams<f32>)>> = par::map_indexed(shards, |s| {
        let lo = s * GRAD_SHARD;
        let hi = (lo + GRAD_SHARD).min(batch);
        backward_batch_sum(params, &features[lo * dim..hi * dim], &targets[lo..hi])
    });
    let mut sq_total = 0.0f64;
    let mut grads: Option<MlpParams<f32>> = None;
    for partial in partials {
        let (sq, g) = partial?;
        sq_total += sq as f64;
        match grads.as_mut() {
            None => grads = Some(g),
            Some(total) => total.map_params_from(&g, |acc, x| acc + x),
        }
    }
    let mut grads = grads.expect("at least one shard");
    grads.scale(1.0 / batch as f32);
    Ok((sq_total / batch as f64, grads))
}

/// The network weights a run of [`train`] starts from.
pub fn init_params(cfg: &TrainConfig) -> MlpParams<f32> {
    MlpParams::<f32>::init(&cfg.arch, cfg.seed ^ SALT_INIT)
}

/// Whether a voxel is held out for validation under this config. The
/// assignment is a pure hash of `(seed, pair index, flat voxel index)`,
/// the same predicate the trainer and sampler use.
pub fn is_validation_voxel(cfg: &TrainConfig, pair: usize, grid: GridSpec, voxel: [usize; 3]) -> bool {
    if cfg.val_fraction <= 0.0 {
        return false;
    }
    let flat = grid.flat(voxel[0], voxel[1], voxel[2]);
    let mut stream = Rng64::stream(cfg.seed ^ SALT_VAL, &[pair as u64, flat as u64]);
    stream.next_f64() < cfg.val_fraction
}

/// Runs the optimization loop and returns the best-validation model plus
/// the per-step log.
pub fn train(pairs: &[TrainingPair], cfg: &TrainConfig) -> Result<(TrainedModel, Vec<LogRow>)> {
    let ctx = TrainContext::new(pairs, cfg)?;
    let mut params = init_params(cfg);
    let mut adam = AdamState::new(&cfg.arch, cfg.lr);
    let mut rng = Rng64::stream(cfg.seed, &[SALT_DRAW]);
    let val_set = ctx.validation_set();
    let mut log = Vec::with_capacity(cfg.steps);
    let mut best: Option<(f64, MlpParams<f32>)> = None;
    let mut features = Vec::new();
    let mut targets = Vec::new();
    for step in 1..=cfg.steps {
        let lr = lr_at(cfg, step);
        adam.lr = lr;
        ctx.fill_batch(&mut rng, &mut features, &mut targets, None)?;
        let (train_mse, grads) = sharded_backward(&params, &features, &targets, ctx.feature_dim)?;
        adam_step(&mut params, &grads, &mut adam)?;
        let val_mse = if !val_set.is_empty() && (step % VAL_EVERY == 0 || step == cfg.steps) {
            let mse = ctx.validation_mse(&params, &val_set);
            if best.as_ref().is_none_or(|(b, _)| mse < *b) {
                best = Some((mse, params.clone()));
            }
            Some(mse)
        } else {
            None
        };
        log.push(LogRow {
            step,
            train_mse,
            val_mse,
            lr,
        });
    }
    let final_params = match best {
        Some((_, p)) => p,
        None => params,
    };
    let affine = if cfg.normalize_targets {
        let n = ctx.target_stats.len() as f64;
        let scale = ctx.target_stats.iter().map(|(_, s)| s).sum::<f64>() / n;
        let offset = ctx.target_stats.iter().map(|(m, _)| m).sum::<f64>() / n;
        OutputAffine { scale, offset }
    } else {
        OutputAffine::identity()
    };
    let model = TrainedModel {
        params: final_params,
        patch_cfg: cfg.patch_cfg,
        n_tilts: pairs[0].measurements.n_tilts(),
        affine,
    };
    model.validate()?;
    Ok((model, log))
}

/// Inclusive-exclusive voxel index box.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IndexBox {
    pub lo: [usize; 3],
    pub hi: [usize; 3],
}

impl IndexBox {
    pub fn full(grid: GridSpec) -> Self {
        IndexBox {
            lo: [0, 0, 0],
            hi: [grid.nx, grid.ny, grid.nz],
        }
    }

    fn dims(&self) -> [usize; 3] {
        [
            self.hi[0] - self.lo[0],
            self.hi[1] - self.lo[1],
            self.hi[2] - self.lo[2],
        ]
    }

    fn validate(&self, grid: GridSpec) -> Result<()> {
        for a in 0..3 {
            let n = [grid.nx, grid.ny, grid.nz][a];
            if self.lo[a] >= self.hi[a] || self.hi[a] > n {
                return Err(TomoError::InvalidInput(format!(
                    "index box [{}, {}) out of range for axis of {} voxels",
                    self.lo[a], self.hi[a], n
                )));
            }
        }
        Ok(())
    }
}

/// Voxel-wise reconstruction of a sub-box of the grid from raw (clean or
/// noisy) measurements; filtering happens internally. Voxels are processed
/// in chunks of `chunk_size`, and the output is identical for any chunk
/// size because every voxel depends only on its own features.
pub fn reconstruct_box(
    ts: &TiltSeries,
    model: &TrainedModel,
    grid: GridSpec,
    bbox: IndexBox,
    chunk_size: usize,
) -> Result<Volume> {
    if ts.kind == SeriesKind::Filtered {
        return Err(TomoError::InvalidInput(String::from(
            "reconstruction takes raw measurements; filtering is internal",
        )));
    }
    if chunk_size < 1 {
        return Err(TomoError::InvalidInput(String::from(
            "chunk size must be >= 1",
        )));
    }
    model.validate()?;
    if ts.n_tilts() != model.n_tilts {
        return Err(TomoError::ShapeMismatch(format!(
            "model expects {} tilts but series has {}",
            model.n_tilts,
            ts.n_tilts()
        )));
    }
    bbox.validate(grid)?;
    let filtered = ramp_filter(ts, &FilterSpec::default())?;
    let extractor = FeatureExtractor::new(&filtered, model.patch_cfg)?;
    let dims = bbox.dims();
    let out_grid = GridSpec::new(dims[0], dims[1], dims[2], grid.voxel_size)?;
    let mut out = Volume::zeros(out_grid);
    let dim = extractor.feature_dim();
    let params = &model.params;
    let scale = model.affine.scale;
    let offset = model.affine.offset;
    par::for_each_chunk_mut(&mut out.data, chunk_size, |chunk_idx, chunk| {
        let mut row = vec![0.0f32; dim];
        let mut ws = Workspace::<f32>::new(&params.arch);
        let base = chunk_idx * chunk_size;
        for (k, slot) in chunk.iter_mut().enumerate() {
            let flat = base + k;
            let bx = flat % dims[0];
            let by = (flat / dims[0]) % dims[1];
            let bz = flat / (dims[0] * dims[1]);
            let r = grid.centered(bbox.lo[0] + bx, bbox.lo[1] + by, bbox.lo[2] + bz);
            extractor.features_into(r, &mut row);
            let pred = forward_with_ws(params, &row, &mut ws) as f64;
            *slot = (scale * pred + offset) as f32;
        }
    });
    Ok(out)
}

/// Full-grid voxel-wise reconstruction.
pub fn reconstruct(
    ts: &TiltSeries,
    model: &TrainedModel,
    grid: GridSpec,
    chunk_size: usize,
) -> Result<Volume> {
    reconstruct_box(ts, model, grid, IndexBox::full(grid), chunk_size)
}
