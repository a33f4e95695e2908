use sritm_core::colorimetry::SidecarMode;
use sritm_core::metrics::{evaluate_pairs, EvalConfig, MetricSet};

use super::ensure_parent;
use crate::config::log_resolved;
use crate::error::{io_err, CliResult};
use crate::EvalArgs;

pub fn run(a: &EvalArgs) -> CliResult<()> {
    let metrics = MetricSet::parse(&a.metrics)?;
    log_resolved(
        "eval",
        &[
            ("pred", a.pred.display().to_string()),
            ("gt", a.gt.display().to_string()),
            ("metrics", a.metrics.clone()),
            (
                "report",
                a.report.as_ref().map_or("none".into(), |p| p.display().to_string()),
            ),
            ("permissive_ms_ssim", a.permissive_ms_ssim.to_string()),
        ],
    );
    let cfg = EvalConfig {
        permissive_ms_ssim: a.permissive_ms_ssim,
        sidecar_mode: SidecarMode::Strict,
        metrics,
        ..Default::default()
    };
    let report = evaluate_pairs(&a.pred, &a.gt, &cfg)?;
    print!("{}", report.to_table());
    if let Some(path) = &a.report {
        ensure_parent(path)?;
        std::fs::write(path, report.to_kv()).map_err(|e| io_err(path, e))?;
    }
    Ok(())
}
