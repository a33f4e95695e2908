//! Display-format colorimetry: transfer functions, gamut and Y'CbCr
//! matrices, quantization, and the SDR ↔ HDR frame pipelines.

mod frame_io;
pub mod gamut;
pub mod quantize;
pub mod transfer;
pub mod ycbcr;

pub use frame_io::{load_frame, save_frame, sidecar_path, SidecarMode, ValueMap};
pub use gamut::{gamut_convert, gamut_matrix, Primaries};
pub use quantize::{dequantize, quantize, requantize};
pub use transfer::{apply_transfer, Direction, Strictness, Transfer};
pub use ycbcr::{ycbcr_convert, MatrixKind};

use crate::error::{Error, Result};
use crate::tensor::{Element, Tensor};

/// Luminance of SDR diffuse white when placing SDR content in absolute light.
pub const SDR_DIFFUSE_WHITE_NITS: f64 = 100.0;
/// Display peak used for PQ content.
pub const HDR_PEAK_NITS: f64 = 1000.0;

/// Colorimetric interpretation of a frame's code values. Range is always full.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ColorimetrySpec {
    pub primaries: Primaries,
    pub transfer: Transfer,
    pub matrix: MatrixKind,
    pub bit_depth: u32,
}

impl ColorimetrySpec {
    /// BT.709 primaries, gamma 2.4, BT.709 Y'CbCr, 8 bit.
    pub const SDR: ColorimetrySpec = ColorimetrySpec {
        primaries: Primaries::Bt709,
        transfer: Transfer::Gamma24,
        matrix: MatrixKind::Bt709,
        bit_depth: 8,
    };

    /// BT.2020 primaries, PQ, BT.2020 non-constant-luminance Y'CbCr, 10 bit.
    pub const HDR: ColorimetrySpec = ColorimetrySpec {
        primaries: Primaries::Bt2020,
        transfer: Transfer::Pq,
        matrix: MatrixKind::Bt2020Ncl,
        bit_depth: 10,
    };

    pub fn validate(&self) -> Result<()> {
        if ![8, 10, 16].contains(&self.bit_depth) {
            return Err(Error::invalid(
                "ColorimetrySpec",
                format!("unsupported bit depth {}", self.bit_depth),
            ));
        }
        Ok(())
    }

    pub fn describe(&self) -> String {
        format!(
            "{:?}/{:?}/{:?}/{}bit",
            self.primaries, self.transfer, self.matrix, self.bit_depth
        )
    }

    pub fn expect(&self, expected: &ColorimetrySpec) -> Result<()> {
        if self != expected {
            return Err(Error::SpecMismatch {
                expected: expected.describe(),
                found: self.describe(),
            });
        }
        Ok(())
    }
}

/// Three planes of normalized code values in [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct ImageFrame {
    pub width: usize,
    pub height: usize,
    pub planes: [Vec<f64>; 3],
    pub spec: ColorimetrySpec,
}

impl ImageFrame {
    pub fn new(width: usize, height: usize, planes: [Vec<f64>; 3], spec: ColorimetrySpec) -> Result<Self> {
        if planes.iter().any(|p| p.len() != width * height) {
            return Err(Error::invalid(
                "ImageFrame",
                format!(
                    "plane lengths {:?} do not match {width}x{height}",
                    planes.iter().map(Vec::len).collect::<Vec<_>>()
                ),
            ));
        }
        spec.validate()?;
        Ok(ImageFrame {
            width,
            height,
            planes,
            spec,
        })
    }

    pub fn filled(width: usize, height: usize, values: [f64; 3], spec: ColorimetrySpec) -> Self {
        let n = width * height;
        ImageFrame {
            width,
            height,
            planes: values.map(|v| vec![v; n]),
            spec,
        }
    }

    /// Snaps every sample to the frame's bit depth.
    pub fn quantized(mut self) -> Self {
        let bits = self.spec.bit_depth;
        for p in &mut self.planes {
            for v in p.iter_mut() {
                *v = requantize(*v, bits);
            }
        }
        self
    }

    /// `(1, 3, H, W)` tensor of the code values.
    pub fn to_tensor<T: Element>(&self) -> Tensor<T> {
        let n = self.width * self.height;
        Tensor::from_fn(&[1, 3, self.height, self.width], |i| {
            T::from_f64(self.planes[i / n][i % n])
        })
    }

    /// Builds a frame from a `(1, 3, H, W)` or `(3, H, W)` tensor.
    pub fn from_tensor<T: Element>(t: &Tensor<T>, spec: ColorimetrySpec) -> Result<Self> {
        let (h, w) = match t.shape() {
            [1, 3, h, w] | [3, h, w] => (*h, *w),
            s => return Err(Error::shape("ImageFrame::from_tensor", s, &[1, 3, 0, 0])),
        };
        let n = h * w;
        let d = t.data();
        let planes = [0, 1, 2].map(|c| d[c * n..(c + 1) * n].iter().map(|v| v.as_f64()).collect());
        ImageFrame::new(w, h, planes, spec)
    }

    /// Crops a `w × h` window at `(x, y)`.
    pub fn crop(&self, x: usize, y: usize, w: usize, h: usize) -> Result<Self> {
        if x + w > self.width || y + h > self.height {
            return Err(Error::invalid(
                "ImageFrame::crop",
                format!("{w}x{h}+{x}+{y} exceeds {}x{}", self.width, self.height),
            ));
        }
        let planes = self.planes.each_ref().map(|p| {
            (y..y + h)
                .flat_map(|r| p[r * self.width + x..r * self.width + x + w].iter().copied())
                .collect()
        });
        Ok(ImageFrame {
            width: w,
            height: h,
            planes,
            spec: self.spec,
        })
    }
}

/// Linear-light RGB, 1.0 = `peak_nits` cd/m².
#[derive(Clone, Debug, PartialEq)]
pub struct LuminanceFrame {
    pub width: usize,
    pub height: usize,
    pub planes: [Vec<f64>; 3],
    pub primaries: Primaries,
    pub peak_nits: f64,
}

impl LuminanceFrame {
    pub fn new(width: usize, height: usize, planes: [Vec<f64>; 3], primaries: Primaries, peak_nits: f64) -> Result<Self> {
        if planes.iter().any(|p| p.len() != width * height) {
            return Err(Error::invalid("LuminanceFrame", "plane size mismatch"));
        }
        Ok(LuminanceFrame {
            width,
            height,
            planes,
            primaries,
            peak_nits,
        })
    }

    pub fn to_primaries(mut self, to: Primaries) -> Self {
        gamut_convert(&mut self.planes, self.primaries, to);
        self.primaries = to;
        self
    }
}

/// Options for moving SDR content into absolute light.
#[derive(Clone, Copy, Debug)]
pub struct LinearizeOptions {
    pub diffuse_white_nits: f64,
    pub peak_nits: f64,
}

impl Default for LinearizeOptions {
    fn default() -> Self {
        LinearizeOptions {
            diffuse_white_nits: SDR_DIFFUSE_WHITE_NITS,
            peak_nits: HDR_PEAK_NITS,
        }
    }
}

fn decode_planes(frame: &ImageFrame) -> [Vec<f64>; 3] {
    let mut planes = frame.planes.clone();
    ycbcr_convert(&mut planes, frame.spec.matrix, false, true);
    planes
}

/// SDR code values → linear light relative to `opts.peak_nits`, with
/// diffuse white at `opts.diffuse_white_nits`. Primaries stay BT.709;
/// use [`LuminanceFrame::to_primaries`] for cross-gamut work.
pub fn sdr_to_linear(frame: &ImageFrame, opts: LinearizeOptions) -> Result<LuminanceFrame> {
    frame.spec.expect(&ColorimetrySpec::SDR)?;
    let scale = opts.diffuse_white_nits / opts.peak_nits;
    let planes = decode_planes(frame).map(|p| {
        p.into_iter()
            .map(|v| transfer::gamma24_decode(v) * scale)
            .collect()
    });
    LuminanceFrame::new(frame.width, frame.height, planes, Primaries::Bt709, opts.peak_nits)
}

/// HDR (PQ/BT.2020) code values → linear light relative to `peak_nits`.
pub fn hdr_to_linear(frame: &ImageFrame, peak_nits: f64) -> Result<LuminanceFrame> {
    if frame.spec.transfer != Transfer::Pq {
        return Err(Error::SpecMismatch {
            expected: "PQ transfer".into(),
            found: frame.spec.describe(),
        });
    }
    let planes = decode_planes(frame).map(|p| {
        p.into_iter()
            .map(|v| transfer::pq_decode_nits(v) / peak_nits)
            .collect()
    });
    LuminanceFrame::new(frame.width, frame.height, planes, frame.spec.primaries, peak_nits)
}

/// Linear light of any supported frame.
pub fn linearize(frame: &ImageFrame, opts: LinearizeOptions) -> Result<LuminanceFrame> {
    match frame.spec.transfer {
        Transfer::Pq => hdr_to_linear(frame, opts.peak_nits),
        Transfer::Gamma24 if frame.spec.primaries == Primaries::Bt709 => sdr_to_linear(frame, opts),
        _ => Err(Error::SpecMismatch {
            expected: "SDR (BT.709/gamma24) or HDR (PQ)".into(),
            found: frame.spec.describe(),
        }),
    }
}

/// Result of encoding linear light into a display format.
#[derive(Clone, Debug)]
pub struct Encoded {
    pub frame: ImageFrame,
    /// Samples clamped into range (negative after a gamut change, or above
    /// SDR white).
    pub clamped: usize,
}

fn clamp_count(planes: &mut [Vec<f64>; 3], lo: f64, hi: f64) -> usize {
    let mut n = 0;
    for v in planes.iter_mut().flatten() {
        if *v < lo || *v > hi {
            n += 1;
            *v = v.clamp(lo, hi);
        }
    }
    n
}

/// Linear light → BT.2020/PQ/10-bit display-format frame.
pub fn hdr_encode(lum: &LuminanceFrame) -> Result<Encoded> {
    let lum = lum.clone().to_primaries(Primaries::Bt2020);
    let mut planes = lum.planes;
    let clamped = clamp_count(&mut planes, 0.0, f64::INFINITY);
    for p in &mut planes {
        for v in p.iter_mut() {
            *v = transfer::pq_encode_nits(*v * lum.peak_nits);
        }
    }
    ycbcr_convert(&mut planes, MatrixKind::Bt2020Ncl, true, true);
    let frame = ImageFrame::new(lum.width, lum.height, planes, ColorimetrySpec::HDR)?.quantized();
    Ok(Encoded { frame, clamped })
}

/// Linear light → BT.709/gamma 2.4/8-bit frame; light above diffuse white clips.
pub fn sdr_encode(lum: &LuminanceFrame, diffuse_white_nits: f64) -> Result<Encoded> {
    let lum = lum.clone().to_primaries(Primaries::Bt709);
    let scale = lum.peak_nits / diffuse_white_nits;
    let mut planes = lum.planes.map(|p| p.into_iter().map(|v| v * scale).collect::<Vec<_>>());
    let clamped = clamp_count(&mut planes, 0.0, 1.0);
    for p in &mut planes {
        for v in p.iter_mut() {
            *v = transfer::gamma24_encode(*v);
        }
    }
    ycbcr_convert(&mut planes, MatrixKind::Bt709, true, true);
    let frame = ImageFrame::new(lum.width, lum.height, planes, ColorimetrySpec::SDR)?.quantized();
    Ok(Encoded { frame, clamped })
}
