use sritm_core::colorimetry::{load_frame, save_frame, ColorimetrySpec, ImageFrame, SidecarMode, ValueMap};
use sritm_core::decomposition::{decompose, DecompositionParams};

use super::ensure_parent;
use crate::config::log_resolved;
use crate::error::{CliError, CliResult};
use crate::DecomposeArgs;

/// Recomposition tolerance for `--verify`.
pub const VERIFY_TOLERANCE: f64 = 1e-6;

pub fn run(a: &DecomposeArgs) -> CliResult<()> {
    let params = DecompositionParams {
        radius: a.radius,
        eps: a.eps,
        ..Default::default()
    };
    log_resolved(
        "decompose",
        &[
            ("input", a.input.display().to_string()),
            ("radius", a.radius.to_string()),
            ("eps", a.eps.to_string()),
            ("div_floor", params.div_floor.to_string()),
            ("out_base", a.out_base.display().to_string()),
            ("out_detail", a.out_detail.display().to_string()),
            ("verify", a.verify.to_string()),
        ],
    );
    params.validate()?;
    let (frame, _) = load_frame(&a.input, SidecarMode::Strict)?;
    let image = frame.to_tensor::<f64>();
    let (base, detail) = decompose(&image, &params)?;

    let spec = ColorimetrySpec {
        bit_depth: 16,
        ..frame.spec
    };
    let base_frame = ImageFrame::from_tensor(&base.map(|v| v.clamp(0.0, 1.0)), spec)?;
    let half = detail.map(|d| (d / 2.0).clamp(0.0, 1.0));
    let clipped = detail.data().iter().filter(|&&d| !(0.0..=2.0).contains(&d)).count();
    let detail_frame = ImageFrame::from_tensor(&half, spec)?;
    for p in [&a.out_base, &a.out_detail] {
        ensure_parent(p)?;
    }
    save_frame(&base_frame, &a.out_base, ValueMap::Identity)?;
    save_frame(&detail_frame, &a.out_detail, ValueMap::DetailHalf)?;
    if clipped > 0 {
        eprintln!("warning: {clipped} detail samples outside [0, 2] were clipped in the stored file");
    }
    println!("base: {}", a.out_base.display());
    println!("detail: {}", a.out_detail.display());

    if a.verify {
        let mut max_err = 0.0_f64;
        let mut skipped = 0usize;
        for ((&i, &b), &d) in image.data().iter().zip(base.data()).zip(detail.data()) {
            if b.abs() < params.div_floor {
                skipped += 1;
                continue;
            }
            max_err = max_err.max((b * d - i).abs());
        }
        println!("verify: max |base * detail - input| = {max_err:.3e} ({skipped} samples at the divisor floor skipped)");
        if max_err > VERIFY_TOLERANCE {
            return Err(CliError::Failed(format!(
                "recomposition error {max_err:.3e} exceeds {VERIFY_TOLERANCE:.0e}"
            )));
        }
    }
    Ok(())
}
