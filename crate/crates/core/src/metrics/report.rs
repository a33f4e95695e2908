use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use rayon::prelude::*;

use super::{mean_std, mpsnr, ms_ssim, psnr, ssim};
use crate::colorimetry::{linearize, load_frame, LinearizeOptions, SidecarMode};
use crate::error::{Error, Result};

/// Per-pair values and their aggregates, metric by metric.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricReport {
    /// metric → pair name → value, in insertion order.
    pub values: IndexMap<String, IndexMap<String, f64>>,
    /// Free-form remarks (scale fallbacks and similar).
    pub notes: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

impl MetricReport {
    pub fn insert(&mut self, metric: &str, pair: &str, value: f64) {
        self.values
            .entry(metric.to_string())
            .or_default()
            .insert(pair.to_string(), value);
    }

    pub fn summary(&self, metric: &str) -> Option<Summary> {
        let vals: Vec<f64> = self.values.get(metric)?.values().copied().collect();
        let (mean, std) = mean_std(&vals);
        Some(Summary {
            mean,
            std,
            count: vals.len(),
        })
    }

    /// `metric.pair.<name>=`, `metric.mean=`, `metric.std=` lines.
    pub fn to_kv(&self) -> String {
        let mut s = String::from("# std is the population standard deviation (divide by N)\n");
        for (metric, pairs) in &self.values {
            for (pair, v) in pairs {
                let _ = writeln!(s, "{metric}.pair.{pair}={v}");
            }
            if let Some(sum) = self.summary(metric) {
                let _ = writeln!(s, "{metric}.mean={}\n{metric}.std={}", sum.mean, sum.std);
            }
        }
        for n in &self.notes {
            let _ = writeln!(s, "# {n}");
        }
        s
    }

    /// Human-readable table: one row per metric, `mean ± std`.
    pub fn to_table(&self) -> String {
        let mut s = format!("{:<10} {:>10}   {:>9}  {:>5}\n", "metric", "mean", "std", "n");
        for metric in self.values.keys() {
            if let Some(sum) = self.summary(metric) {
                let _ = writeln!(
                    s,
                    "{metric:<10} {:>10.4} ± {:>9.4}  {:>5}",
                    sum.mean, sum.std, sum.count
                );
            }
        }
        for n in &self.notes {
            let _ = writeln!(s, "note: {n}");
        }
        s
    }
}

/// Which metrics an evaluation computes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MetricSet {
    pub psnr: bool,
    pub mpsnr: bool,
    pub ssim: bool,
    pub ms_ssim: bool,
}

impl MetricSet {
    pub const ALL: MetricSet = MetricSet {
        psnr: true,
        mpsnr: true,
        ssim: true,
        ms_ssim: true,
    };

    /// Comma-separated names: `psnr`, `mpsnr`, `ssim`, `msssim` (or `ms_ssim`).
    pub fn parse(list: &str) -> Result<Self> {
        let mut set = MetricSet {
            psnr: false,
            mpsnr: false,
            ssim: false,
            ms_ssim: false,
        };
        for name in list.split(',').map(str::trim).filter(|n| !n.is_empty()) {
            match name {
                "psnr" => set.psnr = true,
                "mpsnr" => set.mpsnr = true,
                "ssim" => set.ssim = true,
                "msssim" | "ms_ssim" | "ms-ssim" => set.ms_ssim = true,
                other => return Err(Error::Config(format!("unknown metric `{other}`"))),
            }
        }
        if set == (MetricSet { psnr: false, mpsnr: false, ssim: false, ms_ssim: false }) {
            return Err(Error::Config("no metrics selected".into()));
        }
        Ok(set)
    }
}

impl Default for MetricSet {
    fn default() -> Self {
        MetricSet::ALL
    }
}

#[derive(Clone, Copy, Debug)]
pub struct EvalConfig {
    /// Allow MS-SSIM on frames too small for five scales.
    pub permissive_ms_ssim: bool,
    pub sidecar_mode: SidecarMode,
    pub linearize: LinearizeOptions,
    pub metrics: MetricSet,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            permissive_ms_ssim: false,
            sidecar_mode: SidecarMode::Strict,
            linearize: LinearizeOptions::default(),
            metrics: MetricSet::ALL,
        }
    }
}

fn frame_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let p = e.map_err(|e| Error::io(dir, e))?.path();
        if p.extension().is_some_and(|x| x == "png") {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

struct PairResult {
    name: String,
    psnr: Option<f64>,
    mpsnr: Option<f64>,
    ssim: Option<f64>,
    ms_ssim: Option<(f64, usize)>,
}

/// Scores every `*.png` frame in `gt_dir` against the same-named frame in
/// `pred_dir`. PSNR, SSIM and MS-SSIM use normalized code values (SSIM
/// variants on the luma plane); mPSNR uses linear light.
pub fn evaluate_pairs(pred_dir: &Path, gt_dir: &Path, cfg: &EvalConfig) -> Result<MetricReport> {
    let gt = frame_files(gt_dir)?;
    let pred = frame_files(pred_dir)?;
    let names = |v: &[PathBuf]| -> Vec<String> {
        v.iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect()
    };
    let (gt_names, pred_names) = (names(&gt), names(&pred));
    if let Some(n) = gt_names.iter().find(|n| !pred_names.contains(n)) {
        return Err(Error::Dataset(format!("no prediction for ground-truth frame {n}")));
    }
    if let Some(n) = pred_names.iter().find(|n| !gt_names.contains(n)) {
        return Err(Error::Dataset(format!("prediction {n} has no ground truth")));
    }
    if gt.is_empty() {
        return Err(Error::Dataset(format!("no frames in {}", gt_dir.display())));
    }

    let results: Vec<Result<PairResult>> = gt_names
        .par_iter()
        .map(|name| {
            let (g, _) = load_frame(&gt_dir.join(name), cfg.sidecar_mode)?;
            let (p, _) = load_frame(&pred_dir.join(name), cfg.sidecar_mode)?;
            if g.spec != p.spec {
                return Err(Error::SpecMismatch {
                    expected: g.spec.describe(),
                    found: format!("{} in {name}", p.spec.describe()),
                });
            }
            if (g.width, g.height) != (p.width, p.height) {
                return Err(Error::shape("evaluate_pairs", &[g.height, g.width], &[p.height, p.width]));
            }
            let (w, h) = (g.width, g.height);
            let m = cfg.metrics;
            Ok(PairResult {
                name: name.trim_end_matches(".png").to_string(),
                psnr: m
                    .psnr
                    .then(|| psnr(&p.planes.concat(), &g.planes.concat(), 1.0))
                    .transpose()?,
                mpsnr: m
                    .mpsnr
                    .then(|| mpsnr(&linearize(&p, cfg.linearize)?, &linearize(&g, cfg.linearize)?))
                    .transpose()?,
                ssim: m.ssim.then(|| ssim(&p.planes[0], &g.planes[0], w, h)).transpose()?,
                ms_ssim: m
                    .ms_ssim
                    .then(|| ms_ssim(&p.planes[0], &g.planes[0], w, h, cfg.permissive_ms_ssim))
                    .transpose()?
                    .map(|ms| (ms.value, ms.scales)),
            })
        })
        .collect();

    let mut report = MetricReport::default();
    for r in results {
        let r = r?;
        for (metric, v) in [("psnr", r.psnr), ("mpsnr", r.mpsnr), ("ssim", r.ssim)] {
            if let Some(v) = v {
                report.insert(metric, &r.name, v);
            }
        }
        if let Some((v, scales)) = r.ms_ssim {
            report.insert("ms_ssim", &r.name, v);
            if scales < 5 {
                report
                    .notes
                    .push(format!("{}: MS-SSIM used {scales} of 5 scales", r.name));
            }
        }
    }
    Ok(report)
}
