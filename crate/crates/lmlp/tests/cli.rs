//! Behavior of the `lmlp` binary: artifact layout, determinism, exit
//! codes, and printed values.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lmlp::checkpoint::save_checkpoint;
use lmlp::mrc::{read_volume, write_stack, write_tlt, write_volume};
use lmlp_core::grid::{GridSpec, SeriesKind, TiltGeometry, TiltSeries, Volume};
use lmlp_core::metrics::psnr;
use lmlp_core::mlp::{Activation, MlpArch, MlpParams};
use lmlp_core::patch::{Normalize, PatchConfig};
use lmlp_core::pipeline::{OutputAffine, TrainedModel};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lmlp"))
}

fn tmpdir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("lmlp-cli-{name}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().unwrap();
    assert!(
        out.status.success(),
        "command failed: {:?}\nstdout: {}\nstderr: {}",
        cmd,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn small_spec(dir: &Path) -> PathBuf {
    let path = dir.join("spec.json");
    fs::write(
        &path,
        r#"{"grid": {"nx": 16, "ny": 16, "nz": 16}, "phantom": {"n_blobs": 2}}"#,
    )
    .unwrap();
    path
}

#[test]
fn simulate_is_deterministic_in_seed() {
    let dir = tmpdir("sim-det");
    let spec = small_spec(&dir);
    for sub in ["a", "b"] {
        run_ok(bin().args([
            "simulate",
            "--spec",
            spec.to_str().unwrap(),
            "--angles",
            "-60:60:5",
            "--noise",
            "gaussian:0.5",
            "--seed",
            "7",
            "--out-dir",
            dir.join(sub).to_str().unwrap(),
        ]));
    }
    for name in ["phantom.mrc", "tilts.mrc", "tilts.tlt"] {
        let a = fs::read(dir.join("a").join(name)).unwrap();
        let b = fs::read(dir.join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
    // the resolved config is written next to the outputs
    assert!(dir.join("a/run_config.json").exists());
}

#[test]
fn simulate_single_zero_tilt() {
    let dir = tmpdir("sim-single");
    let spec = small_spec(&dir);
    run_ok(bin().args([
        "simulate",
        "--spec",
        spec.to_str().unwrap(),
        "--angles",
        "0:0:1",
        "--noise",
        "none",
        "--out-dir",
        dir.join("out").to_str().unwrap(),
    ]));
    let tlt = fs::read_to_string(dir.join("out/tilts.tlt")).unwrap();
    assert_eq!(tlt.trim(), "0.0000");
}

#[test]
fn bad_angle_spec_is_a_usage_error() {
    let dir = tmpdir("sim-badangles");
    let out = bin()
        .args([
            "simulate",
            "--angles",
            "banana",
            "--out-dir",
            dir.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_flag_exits_with_usage_code() {
    let out = bin().args(["simulate", "--bogus"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn degenerate_noise_normalization_exits_with_numeric_code() {
    // a zero-density phantom projects to a constant (zero) series, on
    // which Poisson dose normalization is undefined
    let dir = tmpdir("numeric");
    let spec = dir.join("spec.json");
    fs::write(
        &spec,
        r#"{"grid": {"nx": 16, "ny": 16, "nz": 16},
            "phantom": {"n_blobs": 1, "density_lo": 0.0, "density_hi": 0.0}}"#,
    )
    .unwrap();
    let out = bin()
        .args([
            "simulate",
            "--spec",
            spec.to_str().unwrap(),
            "--angles",
            "0:0:1",
            "--noise",
            "poisson:100",
            "--out-dir",
            dir.join("out").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("degenerate dose normalization"), "{msg}");
}

#[test]
fn fbp_zero_input_gives_zero_output_and_missing_sidecar_fails() {
    let dir = tmpdir("fbp-zero");
    let geom = TiltGeometry::uniform(-60.0, 60.0, 5).unwrap();
    let ts = TiltSeries::zeros(geom, 16, 16, SeriesKind::Noisy);
    write_stack(&dir.join("t.mrc"), &ts, 1.0).unwrap();
    write_tlt(&dir.join("t.tlt"), ts.geometry.angles_deg()).unwrap();
    run_ok(bin().args([
        "fbp",
        "--tilts",
        dir.join("t.mrc").to_str().unwrap(),
        "--angles",
        dir.join("t.tlt").to_str().unwrap(),
        "--out",
        dir.join("v.mrc").to_str().unwrap(),
    ]));
    let vol = read_volume(&dir.join("v.mrc")).unwrap();
    assert!(vol.data.iter().all(|&v| v == 0.0));
    // every run leaves a resolved-invocation record next to its output
    let manifest = fs::read_to_string(dir.join("v.mrc.run.json")).unwrap();
    assert!(manifest.contains("\"version\""));
    assert!(manifest.contains("\"fbp\""));

    let out = bin()
        .args([
            "fbp",
            "--tilts",
            dir.join("t.mrc").to_str().unwrap(),
            "--angles",
            dir.join("absent.tlt").to_str().unwrap(),
            "--out",
            dir.join("w.mrc").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn fbp_printed_psnr_matches_library() {
    let dir = tmpdir("fbp-quality");
    let spec = small_spec(&dir);
    run_ok(bin().args([
        "simulate",
        "--spec",
        spec.to_str().unwrap(),
        "--angles",
        "-60:60:9",
        "--noise",
        "none",
        "--seed",
        "3",
        "--out-dir",
        dir.join("sim").to_str().unwrap(),
    ]));
    let out = run_ok(bin().args([
        "fbp",
        "--tilts",
        dir.join("sim/tilts.mrc").to_str().unwrap(),
        "--angles",
        dir.join("sim/tilts.tlt").to_str().unwrap(),
        "--out",
        dir.join("fbp.mrc").to_str().unwrap(),
        "--reference",
        dir.join("sim/phantom.mrc").to_str().unwrap(),
    ]));
    let stdout = String::from_utf8(out.stdout).unwrap();
    let line = stdout
        .lines()
        .find(|l| l.contains("psnr vs"))
        .expect("psnr line");
    let printed: f64 = line
        .split('=')
        .nth(1)
        .unwrap()
        .trim()
        .trim_end_matches(" dB")
        .parse()
        .unwrap();
    let recon = read_volume(&dir.join("fbp.mrc")).unwrap();
    let reference = read_volume(&dir.join("sim/phantom.mrc")).unwrap();
    let expect = psnr(&recon, &reference).unwrap();
    assert!(
        (printed - expect).abs() < 1e-9,
        "printed {printed} vs library {expect}"
    );
}

fn write_test_model(path: &Path, n_tilts: usize, p: usize, zero: bool) {
    let patch_cfg = PatchConfig::new(p, 1.0, Normalize::PerSeriesZscore).unwrap();
    let arch = MlpArch::new(patch_cfg.feature_dim(n_tilts), vec![16, 8], Activation::Relu).unwrap();
    let params = if zero {
        MlpParams::<f32>::zeros(&arch)
    } else {
        MlpParams::<f32>::init(&arch, 99)
    };
    let model = TrainedModel {
        params,
        patch_cfg,
        n_tilts,
        affine: OutputAffine::identity(),
    };
    save_checkpoint(path, &model).unwrap();
}

#[test]
fn reconstruct_is_chunk_invariant_and_checks_tilt_count() {
    let dir = tmpdir("rec");
    let spec = small_spec(&dir);
    run_ok(bin().args([
        "simulate",
        "--spec",
        spec.to_str().unwrap(),
        "--angles",
        "-60:60:5",
        "--seed",
        "11",
        "--out-dir",
        dir.join("sim").to_str().unwrap(),
    ]));
    write_test_model(&dir.join("m.lmlp"), 5, 3, false);
    for (chunk, name) in [("1", "a.mrc"), ("4096", "b.mrc")] {
        run_ok(bin().args([
            "reconstruct",
            "--tilts",
            dir.join("sim/tilts.mrc").to_str().unwrap(),
            "--angles",
            dir.join("sim/tilts.tlt").to_str().unwrap(),
            "--model",
            dir.join("m.lmlp").to_str().unwrap(),
            "--chunk",
            chunk,
            "--out",
            dir.join(name).to_str().unwrap(),
        ]));
    }
    let a = fs::read(dir.join("a.mrc")).unwrap();
    let b = fs::read(dir.join("b.mrc")).unwrap();
    assert_eq!(a, b, "reconstruction depends on chunk size");

    // zero-weight model gives a constant volume
    write_test_model(&dir.join("z.lmlp"), 5, 3, true);
    run_ok(bin().args([
        "reconstruct",
        "--tilts",
        dir.join("sim/tilts.mrc").to_str().unwrap(),
        "--angles",
        dir.join("sim/tilts.tlt").to_str().unwrap(),
        "--model",
        dir.join("z.lmlp").to_str().unwrap(),
        "--out",
        dir.join("zero.mrc").to_str().unwrap(),
    ]));
    let z = read_volume(&dir.join("zero.mrc")).unwrap();
    assert!(z.data.iter().all(|&v| v == 0.0));

    // a 41-tilt checkpoint against the 5-tilt series names both counts
    write_test_model(&dir.join("wrong.lmlp"), 41, 3, false);
    let out = bin()
        .args([
            "reconstruct",
            "--tilts",
            dir.join("sim/tilts.mrc").to_str().unwrap(),
            "--angles",
            dir.join("sim/tilts.tlt").to_str().unwrap(),
            "--model",
            dir.join("wrong.lmlp").to_str().unwrap(),
            "--out",
            dir.join("w.mrc").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("41") && msg.contains('5'), "{msg}");
}

#[test]
fn train_cli_runs_and_rejects_bad_manifests() {
    let dir = tmpdir("train");
    let spec_path = dir.join("spec.json");
    fs::write(
        &spec_path,
        r#"{
            "grid": {"nx": 16, "ny": 16, "nz": 16},
            "phantom": {"n_blobs": 2},
            "patch": {"p": 3},
            "mlp": {"hidden": [16, 8]},
            "train": {"steps": 25, "batch_size": 8, "lr": 0.001, "val_fraction": 0.1}
        }"#,
    )
    .unwrap();
    for (seed, sub) in [("1", "p0"), ("2", "p1")] {
        run_ok(bin().args([
            "simulate",
            "--spec",
            spec_path.to_str().unwrap(),
            "--angles",
            "-60:60:5",
            "--seed",
            seed,
            "--out-dir",
            dir.join(sub).to_str().unwrap(),
        ]));
    }
    let manifest = dir.join("pairs.csv");
    fs::write(
        &manifest,
        "reference,tilts,angles\n\
         p0/phantom.mrc,p0/tilts.mrc,p0/tilts.tlt\n\
         p1/phantom.mrc,p1/tilts.mrc,p1/tilts.tlt\n",
    )
    .unwrap();
    run_ok(bin().args([
        "train",
        "--pairs",
        manifest.to_str().unwrap(),
        "--config",
        spec_path.to_str().unwrap(),
        "--out",
        dir.join("model.lmlp").to_str().unwrap(),
    ]));
    assert!(dir.join("model.lmlp").exists());
    let log = fs::read_to_string(dir.join("model.log.csv")).unwrap();
    assert!(log.starts_with("step,train_mse,val_mse,lr"));
    assert_eq!(log.lines().count(), 26); // header + 25 steps
    assert!(dir.join("run_config.json").exists());

    // training is reproducible: same seed, same log bytes
    run_ok(bin().args([
        "train",
        "--pairs",
        manifest.to_str().unwrap(),
        "--config",
        spec_path.to_str().unwrap(),
        "--out",
        dir.join("model2.lmlp").to_str().unwrap(),
    ]));
    assert_eq!(
        fs::read(dir.join("model.log.csv")).unwrap(),
        fs::read(dir.join("model2.log.csv")).unwrap()
    );
    assert_eq!(
        fs::read(dir.join("model.lmlp")).unwrap(),
        fs::read(dir.join("model2.lmlp")).unwrap()
    );

    // empty manifest is a usage error
    let empty = dir.join("empty.csv");
    fs::write(&empty, "reference,tilts,angles\n").unwrap();
    let out = bin()
        .args([
            "train",
            "--pairs",
            empty.to_str().unwrap(),
            "--out",
            dir.join("x.lmlp").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // a row with a different tilt count is named in the error
    run_ok(bin().args([
        "simulate",
        "--spec",
        spec_path.to_str().unwrap(),
        "--angles",
        "-60:60:7",
        "--seed",
        "3",
        "--out-dir",
        dir.join("p2").to_str().unwrap(),
    ]));
    let bad = dir.join("bad.csv");
    fs::write(
        &bad,
        "reference,tilts,angles\n\
         p0/phantom.mrc,p0/tilts.mrc,p0/tilts.tlt\n\
         p2/phantom.mrc,p2/tilts.mrc,p2/tilts.tlt\n",
    )
    .unwrap();
    let out = bin()
        .args([
            "train",
            "--pairs",
            bad.to_str().unwrap(),
            "--config",
            spec_path.to_str().unwrap(),
            "--out",
            dir.join("y.lmlp").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("row 2") || msg.contains("p2"), "{msg}");
}

#[test]
fn fsc_cli_self_comparison_is_all_ones() {
    let dir = tmpdir("fsc");
    let spec = small_spec(&dir);
    run_ok(bin().args([
        "simulate",
        "--spec",
        spec.to_str().unwrap(),
        "--angles",
        "0:0:1",
        "--seed",
        "5",
        "--out-dir",
        dir.join("sim").to_str().unwrap(),
    ]));
    let vol = dir.join("sim/phantom.mrc");
    run_ok(bin().args([
        "fsc",
        "--a",
        vol.to_str().unwrap(),
        "--b",
        vol.to_str().unwrap(),
        "--out",
        dir.join("curve.csv").to_str().unwrap(),
    ]));
    let text = fs::read_to_string(dir.join("curve.csv")).unwrap();
    for line in text.lines().skip(1) {
        let fsc: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!((fsc - 1.0).abs() < 1e-6, "{line}");
    }

    // grid mismatch is a data error
    let other = Volume::zeros(GridSpec::cube(8).unwrap());
    write_volume(&dir.join("small.mrc"), &other).unwrap();
    let out = bin()
        .args([
            "fsc",
            "--a",
            vol.to_str().unwrap(),
            "--b",
            dir.join("small.mrc").to_str().unwrap(),
            "--out",
            dir.join("c2.csv").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

fn decode_png(path: &Path) -> (usize, usize, Vec<u8>) {
    let decoder = png::Decoder::new(fs::File::open(path).unwrap());
    let mut reader = decoder.read_info().unwrap();
    let mut buf = vec![0u8; reader.output_buffer_size()];
    let info = reader.next_frame(&mut buf).unwrap();
    buf.truncate(info.buffer_size());
    (info.width as usize, info.height as usize, buf)
}

#[test]
fn slice_constant_volume_is_uniform_gray() {
    let dir = tmpdir("slice-const");
    let vol = Volume::filled(GridSpec::cube(16).unwrap(), 3.25);
    write_volume(&dir.join("c.mrc"), &vol).unwrap();
    run_ok(bin().args([
        "slice",
        "--volume",
        dir.join("c.mrc").to_str().unwrap(),
        "--out-dir",
        dir.to_str().unwrap(),
    ]));
    for name in ["slice_xy.png", "slice_xz.png", "slice_yz.png"] {
        let (w, h, pixels) = decode_png(&dir.join(name));
        assert_eq!((w, h), (16, 16));
        let first = pixels[0];
        assert!(pixels.iter().all(|&p| p == first), "{name} not uniform");
    }
}

#[test]
fn slice_of_sphere_shows_disk_of_expected_radius() {
    let dir = tmpdir("slice-sphere");
    let g = GridSpec::cube(64).unwrap();
    let mut vol = Volume::zeros(g);
    lmlp_core::phantom::add_blob(
        &mut vol,
        &lmlp_core::phantom::Blob::sphere([0.0, 0.0, 0.0], 10.0, 1.0),
    );
    write_volume(&dir.join("s.mrc"), &vol).unwrap();
    run_ok(bin().args([
        "slice",
        "--volume",
        dir.join("s.mrc").to_str().unwrap(),
        "--out-dir",
        dir.to_str().unwrap(),
    ]));
    for name in ["slice_xy.png", "slice_xz.png", "slice_yz.png"] {
        let (w, h, pixels) = decode_png(&dir.join(name));
        assert_eq!((w, h), (64, 64));
        let bright = pixels.iter().filter(|&&p| p > 127).count() as f64;
        let radius = (bright / std::f64::consts::PI).sqrt();
        assert!(
            (radius - 10.0).abs() <= 1.0,
            "{name}: disk radius {radius}"
        );
    }
}
