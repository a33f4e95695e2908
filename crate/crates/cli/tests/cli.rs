use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sritm_core::colorimetry::transfer::{gamma24_encode, pq_decode_nits};
use sritm_core::colorimetry::{
    gamut_convert, hdr_encode, load_frame, save_frame, sdr_encode, ycbcr_convert, ColorimetrySpec, ImageFrame,
    LuminanceFrame, MatrixKind, Primaries, SidecarMode, ValueMap, HDR_PEAK_NITS, SDR_DIFFUSE_WHITE_NITS,
};
use sritm_core::dataset::{read_shard, synthetic_pairs};
use sritm_core::network::{Architecture, BlockKind};
use sritm_core::tensor::resize_bicubic;
use sritm_core::trainer::desk_preset;
use sritm_core::{Network, NetworkConfig, Scale};
use tempfile::TempDir;

fn sritm(args: &[&str]) -> Output {
    sritm_env(args, &[])
}

fn sritm_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_sritm"));
    cmd.args(args);
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// In-gamut SDR frame: random linear BT.709 light up to diffuse white.
fn sdr_frame(w: usize, h: usize, seed: u64) -> ImageFrame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let white = SDR_DIFFUSE_WHITE_NITS / HDR_PEAK_NITS;
    let planes = [0, 1, 2].map(|_| (0..w * h).map(|_| rng.gen_range(0.0..white)).collect());
    let lum = LuminanceFrame::new(w, h, planes, Primaries::Bt709, HDR_PEAK_NITS).unwrap();
    sdr_encode(&lum, SDR_DIFFUSE_WHITE_NITS).unwrap().frame
}

fn write(frame: &ImageFrame, path: &Path) {
    save_frame(frame, path, ValueMap::Identity).unwrap();
}

fn read(path: &Path) -> (ImageFrame, ValueMap) {
    load_frame(path, SidecarMode::Strict).unwrap()
}

fn small_full() -> NetworkConfig {
    NetworkConfig::full(2).with_width(4)
}

const SMALL_FULL_SETS: [&str; 4] = ["--set", "base_channels=4", "--set", "pre_shuffle_channels=16"];

#[test]
fn decompose_constant_frame_gives_mid_gray_detail() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("flat.png");
    write(&ImageFrame::filled(12, 10, [0.4, 0.5, 0.6], ColorimetrySpec::SDR).quantized(), &input);
    let (base, detail) = (dir.path().join("b.png"), dir.path().join("d.png"));
    let o = sritm(&[
        "decompose",
        "--input",
        p(&input),
        "--out-base",
        p(&base),
        "--out-detail",
        p(&detail),
        "--verify",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (d, map) = read(&detail);
    assert_eq!(map, ValueMap::DetailHalf);
    let first = d.planes[0][0];
    assert!((first - 0.5).abs() < 1e-4, "{first}");
    assert!(d.planes.iter().flatten().all(|&v| v == first));
    let text = std::fs::read_to_string(dir.path().join("d.meta")).unwrap();
    assert!(text.contains("value_map=detail_half"), "{text}");
}

#[test]
fn decompose_verify_and_missing_sidecar() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("img.png");
    write(&sdr_frame(24, 20, 1), &input);
    let (base, detail) = (dir.path().join("b.png"), dir.path().join("d.png"));
    let args = |inp: &Path| {
        vec![
            "decompose".to_string(),
            "--input".into(),
            p(inp).into(),
            "--radius".into(),
            "3".into(),
            "--out-base".into(),
            p(&base).into(),
            "--out-detail".into(),
            p(&detail).into(),
            "--verify".into(),
        ]
    };
    let a = args(&input);
    let o = sritm(&a.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("verify: max"), "{}", stdout(&o));

    let orphan = dir.path().join("orphan.png");
    std::fs::copy(&input, &orphan).unwrap();
    let a = args(&orphan);
    let o = sritm(&a.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("orphan.meta"), "{}", stderr(&o));
}

#[test]
fn infer_zero_weights_is_bicubic() {
    let dir = TempDir::new().unwrap();
    let weights = dir.path().join("w.sritm");
    Network::<f32>::zeros(small_full()).unwrap().save_weights(&weights).unwrap();
    let input = dir.path().join("lr.png");
    let lr = sdr_frame(16, 12, 2);
    write(&lr, &input);
    let output = dir.path().join("out/hr.png");
    let mut args = vec!["infer", "--weights", p(&weights), "--input", p(&input), "--output", p(&output)];
    args.extend(SMALL_FULL_SETS);
    let o = sritm(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stderr(&o).contains("# resolved config: infer"));

    let (hr, _) = read(&output);
    assert_eq!((hr.width, hr.height), (32, 24));
    assert_eq!(hr.spec, ColorimetrySpec::HDR);
    let expect = resize_bicubic(&lr.to_tensor::<f64>(), Scale::up(2), false).unwrap();
    let half_code = 0.5 / 1023.0;
    let got = hr.to_tensor::<f64>();
    for (g, e) in got.data().iter().zip(expect.data()) {
        assert!((g - e.clamp(0.0, 1.0)).abs() <= half_code + 1e-6, "{g} vs {e}");
    }
}

#[test]
fn infer_dumps_one_map_per_modulated_block() {
    let dir = TempDir::new().unwrap();
    let weights = dir.path().join("w.sritm");
    let cfg = small_full();
    Network::<f32>::new(cfg.clone(), 3).unwrap().save_weights(&weights).unwrap();
    let input = dir.path().join("lr.png");
    write(&sdr_frame(10, 8, 4), &input);
    let maps = dir.path().join("maps");
    let hr = dir.path().join("hr.png");
    let mut args = vec![
        "infer",
        "--weights",
        p(&weights),
        "--input",
        p(&input),
        "--output",
        p(&hr),
        "--dump-modulation-maps",
        p(&maps),
    ];
    args.extend(SMALL_FULL_SETS);
    let o = sritm(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let arch = Architecture::from_config(&cfg).unwrap();
    let modulated: Vec<String> = arch
        .passes
        .iter()
        .flat_map(|pass| pass.blocks.iter())
        .filter(|b| b.kind.is_modulated())
        .map(|b| b.name.clone())
        .collect();
    assert_eq!(modulated.len(), 6);
    let mut files: Vec<String> = std::fs::read_dir(&maps)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".png"))
        .collect();
    files.sort();
    assert_eq!(files.len(), modulated.len(), "{files:?}");
    for name in &modulated {
        let file = maps.join(format!("modmap_{name}.png"));
        let (f, map) = read(&file);
        assert_eq!(map, ValueMap::MinMax);
        assert_eq!((f.width, f.height), (10, 8));
        let (lo, hi) = f
            .planes[0]
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
        assert!(lo >= 0.0 && hi <= 1.0);
    }
    assert!(modulated.iter().any(|n| n == "base.rmb1"));
    assert_eq!(arch.count_blocks("base", BlockKind::ResMod), 3);
}

#[test]
fn infer_rejects_incompatible_weights() {
    let dir = TempDir::new().unwrap();
    let weights = dir.path().join("w.sritm");
    Network::<f32>::zeros(small_full()).unwrap().save_weights(&weights).unwrap();
    let input = dir.path().join("lr.png");
    write(&sdr_frame(8, 8, 5), &input);
    let o = sritm(&[
        "infer",
        "--weights",
        p(&weights),
        "--input",
        p(&input),
        "--output",
        p(&dir.path().join("hr.png")),
    ]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stderr(&o).contains("loading weights"), "{}", stderr(&o));
}

fn tiny_train_args<'a>(out: &'a str, extra: &[&'a str]) -> Vec<&'a str> {
    let mut a = vec![
        "train",
        "--preset",
        "desk",
        "--set",
        "stage1_iters=4",
        "--set",
        "stage2_iters=4",
        "--set",
        "eval_every=3",
        "--out",
        out,
    ];
    a.extend_from_slice(extra);
    a
}

#[test]
fn train_resume_reproduces_the_log() {
    let dir = TempDir::new().unwrap();
    let whole = dir.path().join("whole");
    let split = dir.path().join("split");
    let o = sritm(&tiny_train_args(p(&whole), &[]));
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = sritm(&tiny_train_args(p(&split), &["--until", "5"]));
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("stopped at iteration 5"), "{}", stdout(&o));
    let ckpt = split.join("last.ckpt");
    let o = sritm(&tiny_train_args(p(&split), &["--resume", p(&ckpt)]));
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let log_a = std::fs::read_to_string(whole.join("train.log")).unwrap();
    let log_b = std::fs::read_to_string(split.join("train.log")).unwrap();
    assert_eq!(log_a, log_b);
    assert_eq!(log_a.matches("stage_boundary").count(), 1);
    assert_eq!(
        std::fs::read(whole.join("weights.sritm")).unwrap(),
        std::fs::read(split.join("weights.sritm")).unwrap()
    );
    let resolved = std::fs::read_to_string(whole.join("config.txt")).unwrap();
    assert!(resolved.contains("stage1_iters = 4"), "{resolved}");
}

#[test]
fn train_rejects_unknown_config_key() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("train.cfg");
    std::fs::write(&cfg, "# settings\nbatch_size = 2\nlearning_rate = 1e-3\n").unwrap();
    let out = dir.path().join("run");
    let o = sritm(&["train", "--preset", "desk", "--config", p(&cfg), "--out", p(&out)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("learning_rate"), "{}", stderr(&o));
    assert!(!out.join("weights.sritm").exists());

    let o = sritm(&["train", "--out", p(&out)]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn train_desk_preset_overfits() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("desk");
    let o = sritm(&["train", "--preset", "desk", "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let preset = desk_preset(2);
    let net = Network::<f32>::load_weights(preset.network.clone(), &out.join("weights.sritm")).unwrap();
    let data = synthetic_pairs(preset.scenes, preset.scene_size, &preset.dataset).unwrap();
    let sample = &data[0];
    let (c, h, w) = (3, sample.lr_sdr.shape()[1], sample.lr_sdr.shape()[2]);
    let x = sample.lr_sdr.clone().reshape(&[1, c, h, w]).unwrap();
    let y = net.forward(&x).unwrap();
    let pred: Vec<f64> = y.data().iter().map(|&v| v as f64).collect();
    let gt: Vec<f64> = sample.hr_hdr.data().iter().map(|&v| v as f64).collect();
    let psnr = sritm_core::metrics::psnr(&pred, &gt, 1.0).unwrap();
    assert!(psnr > 40.0, "training-patch PSNR {psnr}");
}

fn hdr_frames(dir: &Path, names: &[&str], seed: u64) {
    std::fs::create_dir_all(dir).unwrap();
    for (i, n) in names.iter().enumerate() {
        let sdr = sdr_frame(24, 24, seed + i as u64);
        let lum = sritm_core::colorimetry::sdr_to_linear(&sdr, Default::default()).unwrap();
        write(&hdr_encode(&lum).unwrap().frame, &dir.join(n));
    }
}

#[test]
fn eval_identical_and_subset() {
    let dir = TempDir::new().unwrap();
    let (gt, pred) = (dir.path().join("gt"), dir.path().join("pred"));
    hdr_frames(&gt, &["a.png", "b.png"], 10);
    hdr_frames(&pred, &["a.png", "b.png"], 20);
    let report = dir.path().join("r.txt");
    let o = sritm(&[
        "eval",
        "--pred",
        p(&gt),
        "--gt",
        p(&gt),
        "--report",
        p(&report),
        "--permissive-ms-ssim",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("ssim"));
    let text = std::fs::read_to_string(&report).unwrap();
    let kv: Vec<(&str, &str)> = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| l.split_once('=').expect("key=value line"))
        .collect();
    let get = |k: &str| kv.iter().find(|(key, _)| *key == k).map(|(_, v)| *v);
    assert_eq!(get("ssim.mean"), Some("1"));
    assert_eq!(get("psnr.pair.a"), Some("inf"));
    assert_eq!(get("ms_ssim.pair.b"), Some("1"));

    let o = sritm(&[
        "eval",
        "--pred",
        p(&pred),
        "--gt",
        p(&gt),
        "--metrics",
        "psnr,ssim",
        "--report",
        p(&report),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = std::fs::read_to_string(&report).unwrap();
    assert!(text.contains("psnr.mean=") && text.contains("ssim.mean="));
    assert!(!text.contains("mpsnr") && !text.contains("ms_ssim"), "{text}");

    let o = sritm(&["eval", "--pred", p(&pred), "--gt", p(&gt), "--metrics", "psnr,vmaf"]);
    assert_eq!(code(&o), 2);
    std::fs::remove_file(pred.join("b.png")).unwrap();
    let o = sritm(&["eval", "--pred", p(&pred), "--gt", p(&gt), "--metrics", "psnr"]);
    assert_ne!(code(&o), 0);
    assert!(stderr(&o).contains("b.png"), "{}", stderr(&o));
}

#[test]
fn convert_same_format_is_a_copy() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("in.png");
    write(&sdr_frame(9, 7, 6), &input);
    let out = dir.path().join("out.png");
    let o = sritm(&["convert", "--input", p(&input), "--to", "gamma709", "--output", p(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(std::fs::read(&input).unwrap(), std::fs::read(&out).unwrap());
    assert_eq!(
        std::fs::read(dir.path().join("in.meta")).unwrap(),
        std::fs::read(dir.path().join("out.meta")).unwrap()
    );
}

/// HDR code values to unquantized SDR code values, step by step.
fn hdr_code_to_sdr(code: [f64; 3]) -> [f64; 3] {
    let mut planes = code.map(|v| vec![v]);
    ycbcr_convert(&mut planes, MatrixKind::Bt2020Ncl, false, true);
    let mut planes = planes.map(|p| vec![pq_decode_nits(p[0])]);
    gamut_convert(&mut planes, Primaries::Bt2020, Primaries::Bt709);
    let mut planes = planes.map(|p| vec![gamma24_encode((p[0] / SDR_DIFFUSE_WHITE_NITS).clamp(0.0, 1.0))]);
    ycbcr_convert(&mut planes, MatrixKind::Bt709, true, true);
    planes.map(|p| p[0])
}

/// Worst-case SDR error after an exact SDR frame passes through a 10-bit
/// HDR intermediate: half an 8-bit code for the final rounding plus the
/// secant response to half a 10-bit code in each intermediate plane.
fn roundtrip_bound(code: [f64; 3]) -> [f64; 3] {
    let half10 = 0.5 / 1023.0;
    let base = hdr_code_to_sdr(code);
    let mut bound = [0.5 / 255.0; 3];
    for j in 0..3 {
        let mut worst = [0.0_f64; 3];
        for sign in [-1.0, 1.0] {
            let mut moved = code;
            moved[j] += sign * half10;
            let out = hdr_code_to_sdr(moved);
            for c in 0..3 {
                worst[c] = worst[c].max((out[c] - base[c]).abs());
            }
        }
        for c in 0..3 {
            bound[c] += worst[c];
        }
    }
    bound
}

#[test]
fn convert_roundtrip_and_clamp_warning() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("sdr.png");
    let sdr = sdr_frame(16, 16, 7);
    write(&sdr, &input);
    let hdr = dir.path().join("hdr.png");
    let back = dir.path().join("back.png");
    let o = sritm(&["convert", "--input", p(&input), "--to", "pq2020", "--output", p(&hdr)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(read(&hdr).0.spec, ColorimetrySpec::HDR);
    let o = sritm(&["convert", "--input", p(&hdr), "--to", "gamma709", "--output", p(&back)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (b, _) = read(&back);
    let (h, _) = read(&hdr);
    for i in 0..sdr.width * sdr.height {
        let code = [0, 1, 2].map(|c| h.planes[c][i]);
        let bound = roundtrip_bound(code);
        for c in 0..3 {
            let (got, orig) = (b.planes[c][i], sdr.planes[c][i]);
            assert!((got - orig).abs() <= bound[c] + 1e-9, "pixel {i} plane {c}: {got} vs {orig}");
        }
    }

    let green = LuminanceFrame::new(
        4,
        4,
        [vec![0.0; 16], vec![0.05; 16], vec![0.0; 16]],
        Primaries::Bt2020,
        HDR_PEAK_NITS,
    )
    .unwrap();
    let wide = dir.path().join("wide.png");
    write(&hdr_encode(&green).unwrap().frame, &wide);
    let o = sritm(&[
        "convert",
        "--input",
        p(&wide),
        "--to",
        "gamma709",
        "--output",
        p(&dir.path().join("narrow.png")),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stderr(&o).contains("warning: clamped"), "{}", stderr(&o));
}

#[test]
fn selfcheck_suites() {
    let o = sritm(&["selfcheck", "--suite", "paramcount"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("params sf=2: 2502595"), "{out}");
    assert!(out.contains("params sf=4: 2650307"), "{out}");
    for suite in ["oracles", "gradcheck"] {
        let o = sritm(&["selfcheck", "--suite", suite]);
        assert_eq!(code(&o), 0, "{}", stdout(&o));
        assert!(!stdout(&o).contains("FAIL"));
    }
    assert!(stdout(&sritm(&["selfcheck", "--suite", "gradcheck"])).contains("ResSkipMod"));
    assert_eq!(code(&sritm(&["selfcheck", "--suite", "everything"])), 2);
}

#[test]
fn make_dataset_synthetic_counts_and_determinism() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (dir.path().join("a.srds"), dir.path().join("b.srds"));
    for out in [&a, &b] {
        let o = sritm(&[
            "make-dataset",
            "--synthetic",
            "8",
            "--patch-size",
            "16",
            "--scene-size",
            "40",
            "--seed",
            "3",
            "--out",
            p(out),
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let samples = read_shard(&a).unwrap();
    let mut per_frame = [0usize; 8];
    for s in &samples {
        per_frame[s.frame_id as usize] += 1;
        assert_eq!(s.lr_sdr.shape(), &[3, 8, 8]);
    }
    assert!(per_frame.iter().all(|k| (20..=40).contains(k)), "{per_frame:?}");
    assert_eq!(per_frame.iter().sum::<usize>(), samples.len());
}

#[test]
fn make_dataset_frames_mismatch_names_the_frame() {
    let dir = TempDir::new().unwrap();
    let root = dir.path().join("frames");
    let (hdr, sdr) = (root.join("hdr"), root.join("sdr"));
    std::fs::create_dir_all(&hdr).unwrap();
    std::fs::create_dir_all(&sdr).unwrap();
    let s = sdr_frame(40, 40, 8);
    let lum = sritm_core::colorimetry::sdr_to_linear(&s, Default::default()).unwrap();
    write(&hdr_encode(&lum).unwrap().frame, &hdr.join("shot_0001.png"));
    write(&sdr_frame(40, 32, 9), &sdr.join("shot_0001.png"));
    let out: PathBuf = dir.path().join("x.srds");
    let o = sritm(&[
        "make-dataset",
        "--frames",
        p(&root),
        "--patch-size",
        "16",
        "--out",
        p(&out),
    ]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
    assert!(stderr(&o).contains("shot_0001.png"), "{}", stderr(&o));
}

#[test]
fn thread_count_from_environment() {
    let ok = sritm_env(&["selfcheck", "--suite", "paramcount"], &[("SRITM_THREADS", "2")]);
    assert_eq!(code(&ok), 0);
    let bad = sritm_env(&["selfcheck", "--suite", "paramcount"], &[("SRITM_THREADS", "zero")]);
    assert_eq!(code(&bad), 2);
    assert!(stderr(&bad).contains("SRITM_THREADS"));
}

#[test]
fn unknown_flags_are_usage_errors() {
    assert_eq!(code(&sritm(&["convert", "--input", "x.png", "--bogus"])), 2);
    assert_eq!(code(&sritm(&["convert", "--input", "x.png", "--to", "hlg", "--output", "y.png"])), 2);
}
