//! Subcommand implementations behind the `lmlp` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use lmlp_core::fbp::backproject;
use lmlp_core::filtering::{ramp_filter, FilterKind, FilterSpec};
use lmlp_core::metrics::{fsc, fsc_auc, psnr};
use lmlp_core::phantom::generate_phantom;
use lmlp_core::pipeline::{reconstruct, train, TrainingPair};
use lmlp_core::projector::{apply_noise, project};

use crate::checkpoint::{load_checkpoint, save_checkpoint};
use crate::error::{Result, ToolError};
use crate::mrc::{read_stack, read_volume, write_stack, write_tlt, write_volume};
use crate::pngout::write_orthoslices;
use crate::runconfig::{parse_angles, parse_noise, RunConfig};
use crate::tables::{read_manifest, write_fsc_csv, write_log_csv};

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(ToolError::io(dir))
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

/// Resolved-invocation record written next to every run's outputs.
fn write_run_manifest(next_to: &Path, command: &str, flags: serde_json::Value) -> Result<()> {
    let manifest = serde_json::json!({
        "tool": "lmlp",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "flags": flags,
    });
    let path = if next_to.is_dir() {
        next_to.join("run_manifest.json")
    } else {
        let mut name = next_to.file_name().unwrap_or_default().to_os_string();
        name.push(".run.json");
        next_to.with_file_name(name)
    };
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| ToolError::Data(format!("{}: {e}", path.display())))?;
    fs::write(&path, text + "\n").map_err(ToolError::io(&path))
}

pub struct SimulateArgs {
    pub spec: Option<PathBuf>,
    pub angles: String,
    pub noise: Option<String>,
    pub seed: Option<u64>,
    pub out_dir: PathBuf,
}

/// Generates a phantom, projects it over the requested tilt range, applies
/// noise, and writes `phantom.mrc`, `tilts.mrc`, `tilts.tlt`, and the
/// resolved `run_config.json`.
pub fn simulate(args: &SimulateArgs) -> Result<()> {
    let mut cfg = load_config(args.spec.as_deref())?;
    if let Some(seed) = args.seed {
        cfg.phantom.seed = seed;
        cfg.noise.seed = seed;
    }
    if let Some(noise) = &args.noise {
        cfg.noise.kind = noise.clone();
    }
    let (start, stop, count) = parse_angles(&args.angles)?;
    let geom = lmlp_core::grid::TiltGeometry::uniform(start, stop, count)
        .map_err(|e| ToolError::Usage(e.to_string()))?;
    let phantom_spec = cfg.phantom_spec()?;
    let noise_model = parse_noise(
        &cfg.noise.kind,
        cfg.noise.sigma,
        cfg.noise.dose,
        cfg.noise.seed,
    )?;
    ensure_dir(&args.out_dir)?;
    let volume = generate_phantom(&phantom_spec)?;
    let det_u = cfg.projection.det_u.unwrap_or(volume.grid.nx);
    let det_v = cfg.projection.det_v.unwrap_or(volume.grid.ny);
    let clean = project(&volume, &geom, det_u, det_v, cfg.projection.step)?;
    let observed = apply_noise(&clean, &noise_model)?;
    write_volume(&args.out_dir.join("phantom.mrc"), &volume)?;
    write_stack(
        &args.out_dir.join("tilts.mrc"),
        &observed,
        volume.grid.voxel_size,
    )?;
    write_tlt(&args.out_dir.join("tilts.tlt"), geom.angles_deg())?;
    cfg.write_resolved(&args.out_dir.join("run_config.json"))?;
    println!(
        "simulate: wrote {} ({}^3 phantom, {} tilts {}..{} deg)",
        args.out_dir.display(),
        volume.grid.nx,
        count,
        start,
        stop
    );
    Ok(())
}

pub struct FbpArgs {
    pub tilts: PathBuf,
    pub angles: PathBuf,
    pub filter: String,
    pub out: PathBuf,
    pub reference: Option<PathBuf>,
}

/// Classical reconstruction: ramp filter then back-projection.
pub fn fbp(args: &FbpArgs) -> Result<()> {
    let started = Instant::now();
    let ts = read_stack(&args.tilts, &args.angles)?;
    let kind = match args.filter.as_str() {
        "ramlak" => FilterKind::RamLak,
        "hann" => FilterKind::HannRamLak,
        other => {
            return Err(ToolError::Usage(format!(
                "unknown filter '{other}' (ramlak | hann)"
            )))
        }
    };
    let filtered = ramp_filter(&ts, &FilterSpec::new(kind, 2)?)?;
    let grid = lmlp_core::grid::GridSpec::new(ts.det_u, ts.det_v, ts.det_u, 1.0)?;
    let volume = backproject(&filtered, grid)?;
    write_volume(&args.out, &volume)?;
    let elapsed = started.elapsed().as_secs_f64();
    println!("fbp: reconstructed {} in {elapsed:.2} s", args.out.display());
    if let Some(ref_path) = &args.reference {
        let reference = read_volume(ref_path)?;
        let db = psnr(&volume, &reference)?;
        println!("fbp: psnr vs {} = {db:.12} dB", ref_path.display());
    }
    write_run_manifest(
        &args.out,
        "fbp",
        serde_json::json!({
            "tilts": args.tilts.display().to_string(),
            "angles": args.angles.display().to_string(),
            "filter": args.filter,
            "out": args.out.display().to_string(),
        }),
    )
}

pub struct TrainArgs {
    pub pairs: PathBuf,
    pub config: Option<PathBuf>,
    pub out: PathBuf,
}

/// Trains the voxel-wise network from a manifest of
/// (reference, tilts, angles) rows and writes the checkpoint plus the
/// training log.
pub fn train_cmd(args: &TrainArgs) -> Result<()> {
    let cfg = load_config(args.config.as_deref())?;
    let rows = read_manifest(&args.pairs)?;
    let filter_spec = cfg.filter_spec()?;
    let mut pairs = Vec::with_capacity(rows.len());
    let mut n_tilts: Option<usize> = None;
    for (i, row) in rows.iter().enumerate() {
        let reference = read_volume(&row.reference)?;
        let ts = read_stack(&row.tilts, &row.angles)?;
        if let Some(expect) = n_tilts {
            if ts.n_tilts() != expect {
                return Err(ToolError::Data(format!(
                    "manifest row {} ({}): {} tilts, expected {expect}",
                    i + 1,
                    row.tilts.display(),
                    ts.n_tilts()
                )));
            }
        } else {
            n_tilts = Some(ts.n_tilts());
        }
        let filtered = ramp_filter(&ts, &filter_spec)?;
        pairs.push(
            TrainingPair::new(reference, filtered, row.reference.display().to_string())
                .map_err(|e| {
                    ToolError::Data(format!("manifest row {}: {e}", i + 1))
                })?,
        );
    }
    let train_cfg = cfg.train_config(n_tilts.expect("manifest nonempty"))?;
    let started = Instant::now();
    let (model, log) = train(&pairs, &train_cfg)?;
    let elapsed = started.elapsed().as_secs_f64();
    save_checkpoint(&args.out, &model)?;
    let log_path = args.out.with_extension("log.csv");
    write_log_csv(&log_path, &log)?;
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        cfg.write_resolved(&dir.join("run_config.json"))?;
    } else {
        cfg.write_resolved(Path::new("run_config.json"))?;
    }
    let final_train = log.last().map(|r| r.train_mse).unwrap_or(f64::NAN);
    println!(
        "train: {} pairs, {} steps in {elapsed:.1} s; final train mse {final_train:.6}; wrote {} and {}",
        pairs.len(),
        train_cfg.steps,
        args.out.display(),
        log_path.display()
    );
    Ok(())
}

pub struct ReconstructArgs {
    pub tilts: PathBuf,
    pub angles: PathBuf,
    pub model: PathBuf,
    pub chunk: usize,
    pub out: PathBuf,
}

/// Voxel-wise inference over the full grid implied by the detector.
pub fn reconstruct_cmd(args: &ReconstructArgs) -> Result<()> {
    let ts = read_stack(&args.tilts, &args.angles)?;
    let model = load_checkpoint(&args.model)?;
    if ts.n_tilts() != model.n_tilts {
        return Err(ToolError::Data(format!(
            "{}: checkpoint expects {} tilts but {} has {}",
            args.model.display(),
            model.n_tilts,
            args.tilts.display(),
            ts.n_tilts()
        )));
    }
    let grid = lmlp_core::grid::GridSpec::new(ts.det_u, ts.det_v, ts.det_u, 1.0)?;
    let started = Instant::now();
    let volume = reconstruct(&ts, &model, grid, args.chunk)?;
    let elapsed = started.elapsed().as_secs_f64();
    write_volume(&args.out, &volume)?;
    println!(
        "reconstruct: {} voxels in {elapsed:.2} s -> {}",
        grid.len(),
        args.out.display()
    );
    write_run_manifest(
        &args.out,
        "reconstruct",
        serde_json::json!({
            "tilts": args.tilts.display().to_string(),
            "angles": args.angles.display().to_string(),
            "model": args.model.display().to_string(),
            "chunk": args.chunk,
            "out": args.out.display().to_string(),
        }),
    )
}

pub struct FscArgs {
    pub a: PathBuf,
    pub b: PathBuf,
    pub out: PathBuf,
}

/// FSC curve between two volumes, written as CSV.
pub fn fsc_cmd(args: &FscArgs) -> Result<()> {
    let a = read_volume(&args.a)?;
    let b = read_volume(&args.b)?;
    let curve = fsc(&a, &b, 1.0)?;
    write_fsc_csv(&args.out, &curve)?;
    println!(
        "fsc: {} shells, auc {:.4} -> {}",
        curve.values.len(),
        fsc_auc(&curve),
        args.out.display()
    );
    write_run_manifest(
        &args.out,
        "fsc",
        serde_json::json!({
            "a": args.a.display().to_string(),
            "b": args.b.display().to_string(),
            "out": args.out.display().to_string(),
        }),
    )
}

pub struct SliceArgs {
    pub volume: PathBuf,
    pub out_dir: PathBuf,
}

/// Central orthoslices as 8-bit PNGs.
pub fn slice_cmd(args: &SliceArgs) -> Result<()> {
    let volume = read_volume(&args.volume)?;
    ensure_dir(&args.out_dir)?;
    let paths = write_orthoslices(&volume, &args.out_dir)?;
    println!(
        "slice: wrote {}, {}, {}",
        paths[0].display(),
        paths[1].display(),
        paths[2].display()
    );
    write_run_manifest(
        &args.out_dir,
        "slice",
        serde_json::json!({
            "volume": args.volume.display().to_string(),
            "out_dir": args.out_dir.display().to_string(),
        }),
    )
}
