//! Full-reference image quality metrics.

mod report;

pub use report::{evaluate_pairs, EvalConfig, MetricReport, MetricSet, Summary};

use crate::colorimetry::{requantize, LuminanceFrame};
use crate::error::{Error, Result};
use crate::tensor::{Element, Tensor};

/// PSNR reported for identical inputs.
pub const PSNR_IDENTICAL: f64 = f64::INFINITY;

/// Exposure stops used by [`mpsnr`].
pub const MPSNR_EXPOSURES: [i32; 7] = [-3, -2, -1, 0, 1, 2, 3];

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

pub const MS_SSIM_WEIGHTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];

fn mse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

fn db(mse: f64, peak: f64) -> f64 {
    if mse == 0.0 {
        PSNR_IDENTICAL
    } else {
        10.0 * (peak * peak / mse).log10()
    }
}

/// `10·log10(peak² / MSE)` over all samples.
pub fn psnr(a: &[f64], b: &[f64], peak: f64) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::shape("psnr", &[a.len()], &[b.len()]));
    }
    if a.is_empty() || peak <= 0.0 {
        return Err(Error::invalid("psnr", "needs samples and a positive peak"));
    }
    Ok(db(mse(a, b), peak))
}

pub fn psnr_tensor<T: Element>(a: &Tensor<T>, b: &Tensor<T>, peak: f64) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::shape("psnr", a.shape(), b.shape()));
    }
    let f = |t: &Tensor<T>| t.data().iter().map(|v| v.as_f64()).collect::<Vec<_>>();
    psnr(&f(a), &f(b), peak)
}

/// Exposure/tone-curve settings of the multi-exposure PSNR.
#[derive(Clone, Debug, PartialEq)]
pub struct MpsnrOptions {
    pub exposures: Vec<i32>,
    pub gamma: f64,
    /// `None` skips quantization.
    pub bits: Option<u32>,
    /// Reject negative linear input instead of clamping it away.
    pub strict: bool,
}

impl Default for MpsnrOptions {
    fn default() -> Self {
        MpsnrOptions {
            exposures: MPSNR_EXPOSURES.to_vec(),
            gamma: 2.2,
            bits: Some(10),
            strict: false,
        }
    }
}

fn expose(v: f64, stop: i32, opts: &MpsnrOptions) -> f64 {
    let e = ((2f64.powi(stop) * v).max(0.0)).powf(1.0 / opts.gamma).clamp(0.0, 1.0);
    match opts.bits {
        Some(b) => requantize(e, b),
        None => e,
    }
}

/// PSNR of each exposure, in the order of `opts.exposures`.
pub fn mpsnr_per_exposure(a: &LuminanceFrame, b: &LuminanceFrame, opts: &MpsnrOptions) -> Result<Vec<f64>> {
    if (a.width, a.height) != (b.width, b.height) {
        return Err(Error::shape("mpsnr", &[a.height, a.width], &[b.height, b.width]));
    }
    let flat = |f: &LuminanceFrame| f.planes.concat();
    let (va, vb) = (flat(a), flat(b));
    if opts.strict {
        for (i, &v) in va.iter().chain(&vb).enumerate() {
            if v < 0.0 {
                return Err(Error::NegativeInput { index: i, value: v });
            }
        }
    }
    opts.exposures
        .iter()
        .map(|&c| {
            let ea: Vec<f64> = va.iter().map(|&v| expose(v, c, opts)).collect();
            let eb: Vec<f64> = vb.iter().map(|&v| expose(v, c, opts)).collect();
            psnr(&ea, &eb, 1.0)
        })
        .collect()
}

/// Mean of the per-exposure PSNRs of two linear frames (1.0 = peak).
/// Any exposure at which the frames agree exactly makes the mean infinite.
pub fn mpsnr(a: &LuminanceFrame, b: &LuminanceFrame) -> Result<f64> {
    mpsnr_with(a, b, &MpsnrOptions::default())
}

pub fn mpsnr_with(a: &LuminanceFrame, b: &LuminanceFrame, opts: &MpsnrOptions) -> Result<f64> {
    let v = mpsnr_per_exposure(a, b, opts)?;
    Ok(v.iter().sum::<f64>() / v.len() as f64)
}

/// Normalized 1-D Gaussian taps of the SSIM window.
pub fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let mut g = [0.0; SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    for (i, v) in g.iter_mut().enumerate() {
        let d = i as f64 - c;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = g.iter().sum();
    g.map(|v| v / s)
}

/// Valid-mode separable Gaussian filtering of a `w × h` plane.
fn filter_valid(p: &[f64], w: usize, h: usize, g: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let (ow, oh) = (w + 1 - SSIM_WINDOW, h + 1 - SSIM_WINDOW);
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        let src = &p[y * w..(y + 1) * w];
        for x in 0..ow {
            rows[y * ow + x] = g.iter().zip(&src[x..]).map(|(k, v)| k * v).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..SSIM_WINDOW).map(|k| g[k] * rows[(y + k) * ow + x]).sum();
        }
    }
    out
}

/// Mean SSIM and mean contrast-structure term of two planes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SsimParts {
    pub ssim: f64,
    pub cs: f64,
}

pub fn ssim_parts(a: &[f64], b: &[f64], w: usize, h: usize) -> Result<SsimParts> {
    if a.len() != w * h || b.len() != w * h {
        return Err(Error::shape("ssim", &[h, w], &[a.len().max(b.len())]));
    }
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::invalid(
            "ssim",
            format!("{w}x{h} plane is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window"),
        ));
    }
    let g = gaussian_window();
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let prod = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).collect::<Vec<_>>();
    let mu_a = filter_valid(a, w, h, &g);
    let mu_b = filter_valid(b, w, h, &g);
    let aa = filter_valid(&prod(a, a), w, h, &g);
    let bb = filter_valid(&prod(b, b), w, h, &g);
    let ab = filter_valid(&prod(a, b), w, h, &g);
    let (mut s_sum, mut cs_sum) = (0.0, 0.0);
    for i in 0..mu_a.len() {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = aa[i] - ma * ma;
        let vb = bb[i] - mb * mb;
        let cov = ab[i] - ma * mb;
        let cs = (2.0 * cov + c2) / (va + vb + c2);
        let l = (2.0 * ma * mb + c1) / (ma * ma + mb * mb + c1);
        s_sum += l * cs;
        cs_sum += cs;
    }
    let n = mu_a.len() as f64;
    Ok(SsimParts {
        ssim: s_sum / n,
        cs: cs_sum / n,
    })
}

/// Mean local SSIM (11×11 Gaussian, σ = 1.5, dynamic range 1).
pub fn ssim(a: &[f64], b: &[f64], w: usize, h: usize) -> Result<f64> {
    Ok(ssim_parts(a, b, w, h)?.ssim)
}

/// 2×2 block mean; odd trailing rows/columns are dropped.
pub fn downsample2(p: &[f64], w: usize, h: usize) -> (Vec<f64>, usize, usize) {
    let (ow, oh) = (w / 2, h / 2);
    let mut out = Vec::with_capacity(ow * oh);
    for y in 0..oh {
        for x in 0..ow {
            let i = 2 * y * w + 2 * x;
            out.push(0.25 * (p[i] + p[i + 1] + p[i + w] + p[i + w + 1]));
        }
    }
    (out, ow, oh)
}

/// Multi-scale SSIM value and the number of scales actually used.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MsSsim {
    pub value: f64,
    pub scales: usize,
}

/// Largest scale count a `w × h` plane supports.
pub fn ms_ssim_max_scales(w: usize, h: usize) -> usize {
    let mut n = 0;
    let (mut w, mut h) = (w, h);
    while n < MS_SSIM_WEIGHTS.len() && w >= SSIM_WINDOW && h >= SSIM_WINDOW {
        n += 1;
        w /= 2;
        h /= 2;
    }
    n
}

/// Five-scale MS-SSIM. With `permissive`, planes too small for five scales
/// use as many as fit, with the used weights renormalized to sum to one.
pub fn ms_ssim(a: &[f64], b: &[f64], w: usize, h: usize, permissive: bool) -> Result<MsSsim> {
    let fit = ms_ssim_max_scales(w, h);
    let scales = if fit == MS_SSIM_WEIGHTS.len() {
        fit
    } else if permissive && fit > 0 {
        fit
    } else {
        return Err(Error::invalid(
            "ms_ssim",
            format!(
                "{w}x{h} plane supports {fit} scale(s); 5 need at least {0}x{0}",
                SSIM_WINDOW << 4
            ),
        ));
    };
    let wsum: f64 = MS_SSIM_WEIGHTS[..scales].iter().sum();
    let renorm = if scales == MS_SSIM_WEIGHTS.len() { 1.0 } else { wsum };
    let (mut pa, mut pb, mut cw, mut ch) = (a.to_vec(), b.to_vec(), w, h);
    let mut value = 1.0;
    for (j, &wt) in MS_SSIM_WEIGHTS[..scales].iter().enumerate() {
        let parts = ssim_parts(&pa, &pb, cw, ch)?;
        let term = if j + 1 == scales { parts.ssim } else { parts.cs };
        value *= term.max(0.0).powf(wt / renorm);
        if j + 1 < scales {
            let (na, nw, nh) = downsample2(&pa, cw, ch);
            pb = downsample2(&pb, cw, ch).0;
            pa = na;
            cw = nw;
            ch = nh;
        }
    }
    Ok(MsSsim { value, scales })
}

/// Population mean and standard deviation. Identical values (including
/// all-infinite) have zero spread.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, 0.0);
    }
    if values.iter().all(|&v| v == values[0]) {
        return (values[0], 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if !mean.is_finite() {
        return (mean, f64::INFINITY);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests;
