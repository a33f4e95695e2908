use std::path::{Path, PathBuf};

use sritm_core::colorimetry::{
    load_frame, save_frame, ColorimetrySpec, ImageFrame, MatrixKind, Primaries, SidecarMode, Transfer, ValueMap,
};
use sritm_core::trainer::TrainConfig;
use sritm_core::{Network, NetworkConfig, Tensor};

use super::ensure_parent;
use crate::config::{apply, gather, kv_pairs, log_resolved, lookup};
use crate::error::{io_err, CliResult, Context};
use crate::InferArgs;

/// Grayscale 16-bit frames for visualizing maps.
const MAP_SPEC: ColorimetrySpec = ColorimetrySpec {
    primaries: Primaries::Bt709,
    transfer: Transfer::Linear,
    matrix: MatrixKind::Identity,
    bit_depth: 16,
};

/// Network config from the defaults for `sf` plus file and flag settings.
pub fn network_config(config: Option<&Path>, sets: &[String]) -> CliResult<NetworkConfig> {
    let settings = gather(config, sets)?;
    let sf = match lookup(&settings, "sf") {
        Some(v) => v
            .parse()
            .map_err(|_| crate::error::CliError::Usage(format!("invalid value `{v}` for `sf`")))?,
        None => 2,
    };
    let mut net = NetworkConfig::full(sf);
    apply(&settings, &mut net, &mut TrainConfig::default())?;
    net.validate()?;
    Ok(net)
}

/// Channel mean of a `(1, C, H, W)` map, rescaled to [0, 1] by its own
/// minimum and maximum (all zero when the map is flat).
pub fn normalized_map(map: &Tensor<f32>) -> CliResult<ImageFrame> {
    let (_, c, h, w) = map.dims4()?;
    let n = h * w;
    let mut mean = vec![0.0_f64; n];
    for ch in 0..c {
        for (m, &v) in mean.iter_mut().zip(&map.data()[ch * n..(ch + 1) * n]) {
            *m += v as f64 / c as f64;
        }
    }
    let lo = mean.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = mean.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let plane: Vec<f64> = mean
        .iter()
        .map(|v| if span > 0.0 { (v - lo) / span } else { 0.0 })
        .collect();
    Ok(ImageFrame::new(w, h, [plane.clone(), plane.clone(), plane], MAP_SPEC)?)
}

fn dump_maps(net: &Network<f32>, input: &Tensor<f32>, dir: &Path) -> CliResult<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let maps = net.extract_modulation_maps(input)?;
    let mut written = Vec::new();
    for (block, map) in maps {
        let path = dir.join(format!("modmap_{block}.png"));
        let frame = normalized_map(&map)?;
        save_frame(&frame, &path, ValueMap::MinMax)?;
        written.push(path);
    }
    Ok(written)
}

pub fn run(a: &InferArgs) -> CliResult<()> {
    let net_cfg = network_config(a.config.as_deref(), &a.sets)?;
    let mut resolved: Vec<(&str, String)> = vec![
        ("weights", a.weights.display().to_string()),
        ("input", a.input.display().to_string()),
        ("output", a.output.display().to_string()),
    ];
    if let Some(d) = &a.dump_modulation_maps {
        resolved.push(("dump_modulation_maps", d.display().to_string()));
    }
    let kv = kv_pairs(&net_cfg.to_kv());
    resolved.extend(kv.iter().map(|(k, v)| (k.as_str(), v.clone())));
    log_resolved("infer", &resolved);

    let net = Network::<f32>::load_weights(net_cfg, &a.weights)
        .context(|| format!("loading weights {}", a.weights.display()))?;
    let (frame, _) = load_frame(&a.input, SidecarMode::Strict)?;
    frame.spec.expect(&ColorimetrySpec::SDR)?;
    let input = frame.to_tensor::<f32>();
    let out = net.forward(&input)?;

    let clamped = out.data().iter().filter(|v| !(0.0..=1.0).contains(*v)).count();
    let hdr = ImageFrame::from_tensor(&out.map(|v| v.clamp(0.0, 1.0)), ColorimetrySpec::HDR)?.quantized();
    ensure_parent(&a.output)?;
    save_frame(&hdr, &a.output, ValueMap::Identity)?;
    if clamped > 0 {
        eprintln!("warning: clamped {clamped} output samples into [0, 1]");
    }
    println!(
        "wrote {} ({}x{} -> {}x{})",
        a.output.display(),
        frame.width,
        frame.height,
        hdr.width,
        hdr.height
    );
    if let Some(dir) = &a.dump_modulation_maps {
        for p in dump_maps(&net, &input, dir)? {
            println!("modulation map: {}", p.display());
        }
    }
    Ok(())
}
