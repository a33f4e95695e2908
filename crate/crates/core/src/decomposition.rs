//! Guided-filter base/detail decomposition of the network input.
//!
//! `I_b` is the self-guided filter output per channel, `I_d = I ⊘ I_b`, and
//! each pass receives the input image stacked with one of the layers.

use crate::autodiff::DIV_FLOOR;
use crate::error::{Error, Result};
use crate::tensor::{concat_channels, Element, Tensor};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecompositionParams {
    pub radius: usize,
    /// Regularization on [0, 1]-normalized intensities.
    pub eps: f64,
    /// Minimum divisor magnitude for the detail quotient.
    pub div_floor: f64,
}

impl Default for DecompositionParams {
    fn default() -> Self {
        DecompositionParams {
            radius: 5,
            eps: 0.01,
            div_floor: DIV_FLOOR,
        }
    }
}

impl DecompositionParams {
    pub fn validate(&self) -> Result<()> {
        if self.radius < 1 || !(self.eps > 0.0) || !(self.div_floor > 0.0) {
            return Err(Error::invalid(
                "DecompositionParams",
                format!(
                    "need radius >= 1, eps > 0, div_floor > 0; got {}, {}, {}",
                    self.radius, self.eps, self.div_floor
                ),
            ));
        }
        Ok(())
    }
}

/// Summed-area table with a zero first row and column.
struct Integral {
    w: usize,
    sums: Vec<f64>,
}

impl Integral {
    fn new(values: &[f64], w: usize, h: usize) -> Self {
        let stride = w + 1;
        let mut sums = vec![0.0; stride * (h + 1)];
        for y in 0..h {
            let mut row = 0.0;
            for x in 0..w {
                row += values[y * w + x];
                sums[(y + 1) * stride + x + 1] = sums[y * stride + x + 1] + row;
            }
        }
        Integral { w, sums }
    }

    /// Sum over rows `y0..y1`, columns `x0..x1`.
    fn rect(&self, x0: usize, y0: usize, x1: usize, y1: usize) -> f64 {
        let s = self.w + 1;
        self.sums[y1 * s + x1] - self.sums[y0 * s + x1] - self.sums[y1 * s + x0] + self.sums[y0 * s + x0]
    }
}

/// Mean over the `(2r+1)²` window truncated to the image.
fn box_mean(values: &[f64], w: usize, h: usize, r: usize) -> Vec<f64> {
    let table = Integral::new(values, w, h);
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        let (y0, y1) = (y.saturating_sub(r), (y + r + 1).min(h));
        for x in 0..w {
            let (x0, x1) = (x.saturating_sub(r), (x + r + 1).min(w));
            let count = ((y1 - y0) * (x1 - x0)) as f64;
            out.push(table.rect(x0, y0, x1, y1) / count);
        }
    }
    out
}

/// Guided filter on one plane. Both planes are shifted by `input[0]` first;
/// the filter is translation-equivariant, and a constant plane then yields
/// exact zeros throughout.
pub fn guided_filter_plane(input: &[f64], guide: &[f64], w: usize, h: usize, r: usize, eps: f64) -> Vec<f64> {
    let shift = input[0];
    let gshift = guide[0];
    let p: Vec<f64> = input.iter().map(|v| v - shift).collect();
    let g: Vec<f64> = guide.iter().map(|v| v - gshift).collect();
    let gg: Vec<f64> = g.iter().map(|v| v * v).collect();
    let gp: Vec<f64> = g.iter().zip(&p).map(|(a, b)| a * b).collect();
    let mean_g = box_mean(&g, w, h, r);
    let mean_p = box_mean(&p, w, h, r);
    let mean_gg = box_mean(&gg, w, h, r);
    let mean_gp = box_mean(&gp, w, h, r);
    let mut a = Vec::with_capacity(w * h);
    let mut b = Vec::with_capacity(w * h);
    for i in 0..w * h {
        let var = mean_gg[i] - mean_g[i] * mean_g[i];
        let cov = mean_gp[i] - mean_g[i] * mean_p[i];
        let ai = cov / (var + eps);
        a.push(ai);
        b.push(mean_p[i] - ai * mean_g[i]);
    }
    let mean_a = box_mean(&a, w, h, r);
    let mean_b = box_mean(&b, w, h, r);
    (0..w * h)
        .map(|i| mean_a[i] * g[i] + mean_b[i] + shift)
        .collect()
}

/// Per-channel guided filter of a rank-4 tensor.
pub fn guided_filter<T: Element>(
    input: &Tensor<T>,
    guide: &Tensor<T>,
    params: &DecompositionParams,
) -> Result<Tensor<T>> {
    if input.shape() != guide.shape() {
        return Err(Error::shape("guided_filter", input.shape(), guide.shape()));
    }
    params.validate()?;
    let (_, _, h, w) = input.dims4()?;
    let plane = h * w;
    let mut out = Vec::with_capacity(input.len());
    for (ip, gp) in input.data().chunks(plane).zip(guide.data().chunks(plane)) {
        let i64s: Vec<f64> = ip.iter().map(|v| v.as_f64()).collect();
        let g64s: Vec<f64> = gp.iter().map(|v| v.as_f64()).collect();
        out.extend(
            guided_filter_plane(&i64s, &g64s, w, h, params.radius, params.eps)
                .into_iter()
                .map(T::from_f64),
        );
    }
    Tensor::from_vec(input.shape(), out)
}

/// Base and detail layers of `image`.
pub fn decompose<T: Element>(image: &Tensor<T>, params: &DecompositionParams) -> Result<(Tensor<T>, Tensor<T>)> {
    let base = guided_filter(image, image, params)?;
    let floor = T::from_f64(params.div_floor);
    let detail = image.zip_map(&base, "decompose", |i, b| {
        let d = if b.abs() >= floor {
            b
        } else if b < T::zero() {
            -floor
        } else {
            floor
        };
        i / d
    })?;
    Ok((base, detail))
}

/// `([I I_b], [I I_d])`.
pub fn make_inputs<T: Element>(
    image: &Tensor<T>,
    base: &Tensor<T>,
    detail: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>)> {
    for t in [image, base, detail] {
        let (_, c, _, _) = t.dims4()?;
        if c != 3 || t.shape() != image.shape() {
            return Err(Error::shape("make_inputs", image.shape(), t.shape()));
        }
    }
    Ok((concat_channels(image, base)?, concat_channels(image, detail)?))
}
