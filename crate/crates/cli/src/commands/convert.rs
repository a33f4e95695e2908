use sritm_core::colorimetry::{
    hdr_encode, linearize, load_frame, save_frame, sdr_encode, sidecar_path, ColorimetrySpec, LinearizeOptions,
    SidecarMode, ValueMap, SDR_DIFFUSE_WHITE_NITS,
};

use super::ensure_parent;
use crate::config::log_resolved;
use crate::error::{io_err, CliError, CliResult};
use crate::{ConvertArgs, Target};

pub fn run(a: &ConvertArgs) -> CliResult<()> {
    log_resolved(
        "convert",
        &[
            ("input", a.input.display().to_string()),
            ("to", format!("{:?}", a.to).to_lowercase()),
            ("peak_nits", a.peak_nits.to_string()),
            ("output", a.output.display().to_string()),
        ],
    );
    if !(a.peak_nits > 0.0) {
        return Err(CliError::Usage(format!("--peak-nits must be positive, got {}", a.peak_nits)));
    }
    let (frame, _) = load_frame(&a.input, SidecarMode::Strict)?;
    let target = match a.to {
        Target::Pq2020 => ColorimetrySpec::HDR,
        Target::Gamma709 => ColorimetrySpec::SDR,
    };
    ensure_parent(&a.output)?;

    if frame.spec == target {
        for (from, to) in [
            (a.input.clone(), a.output.clone()),
            (sidecar_path(&a.input), sidecar_path(&a.output)),
        ] {
            std::fs::copy(&from, &to).map_err(|e| io_err(&to, e))?;
        }
        println!("{} is already {}; copied unchanged", a.input.display(), target.describe());
        return Ok(());
    }

    let opts = LinearizeOptions {
        diffuse_white_nits: SDR_DIFFUSE_WHITE_NITS,
        peak_nits: a.peak_nits,
    };
    let lum = linearize(&frame, opts)?;
    let encoded = match a.to {
        Target::Pq2020 => hdr_encode(&lum)?,
        Target::Gamma709 => sdr_encode(&lum, SDR_DIFFUSE_WHITE_NITS)?,
    };
    if encoded.clamped > 0 {
        eprintln!(
            "warning: clamped {} of {} samples outside the {} range",
            encoded.clamped,
            3 * frame.width * frame.height,
            target.describe()
        );
    }
    save_frame(&encoded.frame, &a.output, ValueMap::Identity)?;
    println!("wrote {} ({})", a.output.display(), target.describe());
    Ok(())
}
