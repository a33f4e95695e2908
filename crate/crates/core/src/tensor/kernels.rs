//! Raw forward/backward kernels. Shapes are validated by the callers in
//! `autodiff`; these functions assume consistent inputs.

use rayon::prelude::*;

use super::{Element, Tensor};
use crate::error::{Error, Result};

/// Geometry of a stride-1, zero-padded "same" convolution.
#[derive(Clone, Copy, Debug)]
struct ConvGeom {
    c_in: usize,
    c_out: usize,
    k: usize,
    h: usize,
    w: usize,
}

impl ConvGeom {
    fn pad(&self) -> usize {
        self.k / 2
    }

    fn patch(&self) -> usize {
        self.c_in * self.k * self.k
    }

    fn plane(&self) -> usize {
        self.h * self.w
    }
}

fn conv_geom<T: Element>(x: &Tensor<T>, weight: &Tensor<T>, bias: &Tensor<T>) -> Result<ConvGeom> {
    let (_, c_in, h, w) = x.dims4()?;
    let (c_out, wc_in, kh, kw) = weight.dims4()?;
    if wc_in != c_in {
        return Err(Error::shape("conv2d", x.shape(), weight.shape()));
    }
    if kh != kw || kh % 2 == 0 {
        return Err(Error::invalid(
            "conv2d",
            format!("kernel must be square and odd, got {kh}x{kw}"),
        ));
    }
    if bias.shape() != [c_out] {
        return Err(Error::shape("conv2d bias", bias.shape(), &[c_out]));
    }
    Ok(ConvGeom {
        c_in,
        c_out,
        k: kh,
        h,
        w,
    })
}

/// Unfolds one sample `(c_in, h, w)` into a `(c_in·k·k, h·w)` column matrix.
fn im2col<T: Element>(x: &[T], g: ConvGeom, cols: &mut [T]) {
    let (h, w, k, pad) = (g.h, g.w, g.k, g.pad());
    let plane = g.plane();
    for ci in 0..g.c_in {
        let src = &x[ci * plane..(ci + 1) * plane];
        for ky in 0..k {
            for kx in 0..k {
                let row = &mut cols[((ci * k + ky) * k + kx) * plane..][..plane];
                for y in 0..h {
                    let sy = y as isize + ky as isize - pad as isize;
                    let dst = &mut row[y * w..(y + 1) * w];
                    if sy < 0 || sy >= h as isize {
                        dst.fill(T::zero());
                        continue;
                    }
                    let srow = &src[sy as usize * w..(sy as usize + 1) * w];
                    for (x, d) in dst.iter_mut().enumerate() {
                        let sx = x as isize + kx as isize - pad as isize;
                        *d = if sx < 0 || sx >= w as isize {
                            T::zero()
                        } else {
                            srow[sx as usize]
                        };
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters column gradients back onto the sample.
fn col2im<T: Element>(cols: &[T], g: ConvGeom, dx: &mut [T]) {
    let (h, w, k, pad) = (g.h, g.w, g.k, g.pad());
    let plane = g.plane();
    for ci in 0..g.c_in {
        let dst = &mut dx[ci * plane..(ci + 1) * plane];
        for ky in 0..k {
            for kx in 0..k {
                let row = &cols[((ci * k + ky) * k + kx) * plane..][..plane];
                for y in 0..h {
                    let sy = y as isize + ky as isize - pad as isize;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let drow = &mut dst[sy as usize * w..(sy as usize + 1) * w];
                    for x in 0..w {
                        let sx = x as isize + kx as isize - pad as isize;
                        if sx >= 0 && sx < w as isize {
                            drow[sx as usize] = drow[sx as usize] + row[y * w + x];
                        }
                    }
                }
            }
        }
    }
}

/// Stride-1 "same" convolution with zero padding.
pub fn conv2d_forward<T: Element>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    bias: &Tensor<T>,
) -> Result<Tensor<T>> {
    let g = conv_geom(x, weight, bias)?;
    let n = x.shape()[0];
    let plane = g.plane();
    let patch = g.patch();
    let mut out = Tensor::zeros(&[n, g.c_out, g.h, g.w]);
    let wdata = weight.data();
    let bdata = bias.data();
    out.data_mut()
        .par_chunks_mut(g.c_out * plane)
        .zip(x.data().par_chunks(g.c_in * plane))
        .for_each_init(
            || if g.k == 1 { Vec::new() } else { vec![T::zero(); patch * plane] },
            |cols, (y, xs)| {
                for (o, row) in y.chunks_mut(plane).enumerate() {
                    row.fill(bdata[o]);
                }
                let b: &[T] = if g.k == 1 {
                    xs
                } else {
                    im2col(xs, g, cols);
                    cols
                };
                T::gemm(
                    g.c_out,
                    patch,
                    plane,
                    T::one(),
                    wdata,
                    patch,
                    1,
                    b,
                    plane,
                    1,
                    T::one(),
                    y,
                    plane,
                    1,
                );
            },
        );
    Ok(out)
}

/// Gradients of [`conv2d_forward`] with respect to input, weight and bias.
pub fn conv2d_backward<T: Element>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    bias: &Tensor<T>,
    grad_out: &Tensor<T>,
    need_input_grad: bool,
) -> Result<(Option<Tensor<T>>, Tensor<T>, Tensor<T>)> {
    let g = conv_geom(x, weight, bias)?;
    let n = x.shape()[0];
    let plane = g.plane();
    let patch = g.patch();
    if grad_out.shape() != [n, g.c_out, g.h, g.w] {
        return Err(Error::shape(
            "conv2d backward",
            grad_out.shape(),
            &[n, g.c_out, g.h, g.w],
        ));
    }
    let wdata = weight.data();
    let mut dx = need_input_grad.then(|| Tensor::zeros(x.shape()));

    // Per-sample weight/bias partials, reduced in sample order afterwards so
    // the result does not depend on scheduling.
    let per_sample: Vec<(Vec<T>, Vec<T>)> = {
        let dx_chunks: Vec<Option<&mut [T]>> = match dx.as_mut() {
            Some(t) => t
                .data_mut()
                .chunks_mut(g.c_in * plane)
                .map(Some)
                .collect(),
            None => (0..n).map(|_| None).collect(),
        };
        dx_chunks
            .into_par_iter()
            .enumerate()
            .map(|(s, dxs)| {
                let xs = &x.data()[s * g.c_in * plane..(s + 1) * g.c_in * plane];
                let dy = &grad_out.data()[s * g.c_out * plane..(s + 1) * g.c_out * plane];
                let mut cols_buf = Vec::new();
                let cols: &[T] = if g.k == 1 {
                    xs
                } else {
                    cols_buf = vec![T::zero(); patch * plane];
                    im2col(xs, g, &mut cols_buf);
                    &cols_buf
                };
                let mut dw = vec![T::zero(); g.c_out * patch];
                // dW = dY · colsᵀ
                T::gemm(
                    g.c_out,
                    plane,
                    patch,
                    T::one(),
                    dy,
                    plane,
                    1,
                    cols,
                    1,
                    plane,
                    T::zero(),
                    &mut dw,
                    patch,
                    1,
                );
                let db: Vec<T> = dy.chunks(plane).map(|r| r.iter().copied().sum()).collect();
                if let Some(dxs) = dxs {
                    // dcols = Wᵀ · dY
                    if g.k == 1 {
                        T::gemm(
                            patch, g.c_out, plane, T::one(), wdata, 1, patch, dy, plane, 1,
                            T::zero(), dxs, plane, 1,
                        );
                    } else {
                        cols_buf.fill(T::zero());
                        T::gemm(
                            patch,
                            g.c_out,
                            plane,
                            T::one(),
                            wdata,
                            1,
                            patch,
                            dy,
                            plane,
                            1,
                            T::zero(),
                            &mut cols_buf,
                            plane,
                            1,
                        );
                        col2im(&cols_buf, g, dxs);
                    }
                }
                (dw, db)
            })
            .collect()
    };

    let mut dw = Tensor::zeros(weight.shape());
    let mut db = Tensor::zeros(bias.shape());
    for (pw, pb) in per_sample {
        for (a, b) in dw.data_mut().iter_mut().zip(pw) {
            *a = *a + b;
        }
        for (a, b) in db.data_mut().iter_mut().zip(pb) {
            *a = *a + b;
        }
    }
    Ok((dx, dw, db))
}

/// `out[n, c, h·r+a, w·r+b] = in[n, c·r² + a·r + b, h, w]`.
pub fn pixel_shuffle<T: Element>(x: &Tensor<T>, r: usize) -> Result<Tensor<T>> {
    let (n, c, h, w) = x.dims4()?;
    if r == 0 || c % (r * r) != 0 {
        return Err(Error::invalid(
            "pixel_shuffle",
            format!("{c} channels not divisible by r²={}", r * r),
        ));
    }
    let oc = c / (r * r);
    let (oh, ow) = (h * r, w * r);
    let src = x.data();
    let mut out = Tensor::zeros(&[n, oc, oh, ow]);
    let dst = out.data_mut();
    for b in 0..n {
        for co in 0..oc {
            for a in 0..r {
                for bb in 0..r {
                    let ci = co * r * r + a * r + bb;
                    let splane = &src[((b * c + ci) * h) * w..][..h * w];
                    for y in 0..h {
                        let drow = ((b * oc + co) * oh + y * r + a) * ow;
                        for xx in 0..w {
                            dst[drow + xx * r + bb] = splane[y * w + xx];
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Inverse rearrangement of [`pixel_shuffle`] (space-to-depth).
pub fn pixel_unshuffle<T: Element>(x: &Tensor<T>, r: usize) -> Result<Tensor<T>> {
    let (n, c, h, w) = x.dims4()?;
    if r == 0 || h % r != 0 || w % r != 0 {
        return Err(Error::invalid(
            "pixel_unshuffle",
            format!("spatial size {h}x{w} not divisible by {r}"),
        ));
    }
    let (ih, iw) = (h / r, w / r);
    let ic = c * r * r;
    let src = x.data();
    let mut out = Tensor::zeros(&[n, ic, ih, iw]);
    let dst = out.data_mut();
    for b in 0..n {
        for co in 0..c {
            for a in 0..r {
                for bb in 0..r {
                    let ci = co * r * r + a * r + bb;
                    let dplane = ((b * ic + ci) * ih) * iw;
                    for y in 0..ih {
                        let srow = ((b * c + co) * h + y * r + a) * w;
                        for xx in 0..iw {
                            dst[dplane + y * iw + xx] = src[srow + xx * r + bb];
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}
