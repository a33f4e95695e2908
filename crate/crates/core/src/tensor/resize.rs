//! Separable bicubic resampling (Keys kernel, a = -0.5) with half-pixel
//! centres, border clamping, and kernel widening on antialiased downscale.

use super::{Element, Tensor};
use crate::error::{Error, Result};

pub const BICUBIC_A: f64 = -0.5;

/// Rational resize factor `num / den`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Scale {
    pub num: usize,
    pub den: usize,
}

impl Scale {
    pub const fn new(num: usize, den: usize) -> Self {
        Scale { num, den }
    }

    pub const fn up(factor: usize) -> Self {
        Scale { num: factor, den: 1 }
    }

    pub const fn down(factor: usize) -> Self {
        Scale { num: 1, den: factor }
    }

    pub fn as_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// Output length for an input of length `len`, if integral.
    pub fn apply(self, len: usize) -> Option<usize> {
        let scaled = len * self.num;
        (self.den > 0 && scaled % self.den == 0).then_some(scaled / self.den)
    }
}

/// Keys cubic convolution kernel.
pub fn bicubic_kernel(x: f64) -> f64 {
    let a = BICUBIC_A;
    let x = x.abs();
    if x < 1.0 {
        ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        (((x - 5.0) * x + 8.0) * x - 4.0) * a
    } else {
        0.0
    }
}

/// Per-output-sample taps: (first clamped source index list, normalized weights).
struct Taps {
    index: Vec<usize>,
    weight: Vec<f64>,
    offsets: Vec<usize>,
}

fn taps(in_len: usize, out_len: usize, antialias: bool) -> Taps {
    let scale = out_len as f64 / in_len as f64;
    let stretch = if antialias && scale < 1.0 { scale } else { 1.0 };
    let support = 2.0 / stretch;
    let mut index = Vec::new();
    let mut weight = Vec::new();
    let mut offsets = Vec::with_capacity(out_len + 1);
    for i in 0..out_len {
        offsets.push(index.len());
        let centre = (i as f64 + 0.5) / scale - 0.5;
        let lo = (centre - support).floor() as isize + 1;
        let hi = (centre + support).ceil() as isize - 1;
        let start = index.len();
        let mut total = 0.0;
        for j in lo..=hi {
            let w = bicubic_kernel((j as f64 - centre) * stretch);
            if w == 0.0 {
                continue;
            }
            index.push(j.clamp(0, in_len as isize - 1) as usize);
            weight.push(w);
            total += w;
        }
        for w in &mut weight[start..] {
            *w /= total;
        }
    }
    offsets.push(index.len());
    Taps {
        index,
        weight,
        offsets,
    }
}

/// Resizes every plane of a rank-4 tensor to `out_h × out_w`.
pub fn resize_bicubic_to<T: Element>(
    x: &Tensor<T>,
    out_h: usize,
    out_w: usize,
    antialias: bool,
) -> Result<Tensor<T>> {
    let (n, c, h, w) = x.dims4()?;
    if out_h == 0 || out_w == 0 || h == 0 || w == 0 {
        return Err(Error::invalid("resize_bicubic", "empty input or output"));
    }
    let th = taps(h, out_h, antialias);
    let tw = taps(w, out_w, antialias);
    let mut out = Tensor::zeros(&[n, c, out_h, out_w]);
    let mut rows = vec![0.0f64; h * out_w];
    for (src, dst) in x
        .data()
        .chunks(h * w)
        .zip(out.data_mut().chunks_mut(out_h * out_w))
    {
        // horizontal pass
        for y in 0..h {
            let srow = &src[y * w..(y + 1) * w];
            for ox in 0..out_w {
                let (a, b) = (tw.offsets[ox], tw.offsets[ox + 1]);
                let mut acc = 0.0;
                for t in a..b {
                    acc += tw.weight[t] * srow[tw.index[t]].as_f64();
                }
                rows[y * out_w + ox] = acc;
            }
        }
        // vertical pass
        for oy in 0..out_h {
            let (a, b) = (th.offsets[oy], th.offsets[oy + 1]);
            for ox in 0..out_w {
                let mut acc = 0.0;
                for t in a..b {
                    acc += th.weight[t] * rows[th.index[t] * out_w + ox];
                }
                dst[oy * out_w + ox] = T::from_f64(acc);
            }
        }
    }
    Ok(out)
}

/// Resizes by a rational factor; the scaled size must be integral.
pub fn resize_bicubic<T: Element>(x: &Tensor<T>, scale: Scale, antialias: bool) -> Result<Tensor<T>> {
    let (_, _, h, w) = x.dims4()?;
    match (scale.apply(h), scale.apply(w)) {
        (Some(oh), Some(ow)) if oh > 0 && ow > 0 => resize_bicubic_to(x, oh, ow, antialias),
        _ => Err(Error::invalid(
            "resize_bicubic",
            format!("{h}x{w} scaled by {}/{} is not integral", scale.num, scale.den),
        )),
    }
}
