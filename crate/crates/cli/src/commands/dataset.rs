use sritm_core::dataset::{extract_pairs, load_frame_pairs, sample_frames, synthetic_pairs, write_shard, DatasetSpec};

use super::ensure_parent;
use crate::config::log_resolved;
use crate::error::{CliResult, Context};
use crate::MakeDatasetArgs;

pub fn run(a: &MakeDatasetArgs) -> CliResult<()> {
    let spec = DatasetSpec {
        patch_size: a.patch_size,
        sf: a.sf,
        seed: a.seed,
        ..Default::default()
    };
    let source = match (&a.synthetic, &a.frames) {
        (Some(n), _) => format!("synthetic:{n}"),
        (_, Some(d)) => d.display().to_string(),
        _ => unreachable!("clap enforces one source"),
    };
    log_resolved(
        "make-dataset",
        &[
            ("source", source),
            ("sf", a.sf.to_string()),
            ("seed", a.seed.to_string()),
            ("patch_size", a.patch_size.to_string()),
            (
                "patches_per_frame",
                format!("{}..={}", spec.patches_per_frame.0, spec.patches_per_frame.1),
            ),
            ("frame_stride", format!("{}..={}", spec.frame_stride.0, spec.frame_stride.1)),
            ("scene_size", a.scene_size.to_string()),
            ("out", a.out.display().to_string()),
        ],
    );
    spec.validate()?;

    let (samples, frames) = if let Some(n) = a.synthetic {
        (synthetic_pairs(n, a.scene_size, &spec)?, n)
    } else {
        let dir = a.frames.as_ref().expect("clap enforces one source");
        let pairs = load_frame_pairs(&dir.join("hdr"), &dir.join("sdr"))?;
        let picked = sample_frames(pairs.len(), &spec)?;
        let mut out = Vec::new();
        for &i in &picked {
            let (path, hdr, sdr) = &pairs[i];
            let name = path.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned());
            out.extend(extract_pairs(hdr, sdr, i as u32, &spec).context(|| format!("frame {name}"))?);
        }
        (out, picked.len())
    };
    ensure_parent(&a.out)?;
    write_shard(&samples, &a.out)?;
    println!("wrote {} samples from {frames} frames to {}", samples.len(), a.out.display());
    Ok(())
}
