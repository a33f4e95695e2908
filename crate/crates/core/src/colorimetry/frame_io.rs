//! Frame files: a 16-bit RGB PNG raster plus a `key=value` text sidecar.

use std::fs;
use std::path::{Path, PathBuf};

use image::{ImageBuffer, Rgb};

use super::quantize::{dequantize, quantize};
use super::{ColorimetrySpec, ImageFrame, MatrixKind, Primaries, Transfer};
use crate::error::{Error, Result};

/// Whether unknown sidecar keys are tolerated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SidecarMode {
    #[default]
    Strict,
    Permissive,
}

/// Mapping applied to stored values for viewing; informational only.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ValueMap {
    #[default]
    Identity,
    /// Stored value = detail / 2, so a detail ratio of 1 is mid-gray.
    DetailHalf,
    /// Per-map min/max normalization.
    MinMax,
}

impl ValueMap {
    fn as_str(self) -> &'static str {
        match self {
            ValueMap::Identity => "identity",
            ValueMap::DetailHalf => "detail_half",
            ValueMap::MinMax => "minmax",
        }
    }
}

/// `frame.png` → `frame.meta`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("meta")
}

fn primaries_str(p: Primaries) -> &'static str {
    match p {
        Primaries::Bt709 => "bt709",
        Primaries::Bt2020 => "bt2020",
    }
}

fn transfer_str(t: Transfer) -> &'static str {
    match t {
        Transfer::Gamma24 => "gamma24",
        Transfer::Pq => "pq",
        Transfer::Hlg => "hlg",
        Transfer::Linear => "linear",
    }
}

fn matrix_str(m: MatrixKind) -> &'static str {
    match m {
        MatrixKind::Bt709 => "bt709",
        MatrixKind::Bt2020Ncl => "bt2020ncl",
        MatrixKind::Identity => "identity",
    }
}

/// Writes the raster and its sidecar.
pub fn save_frame(frame: &ImageFrame, path: &Path, value_map: ValueMap) -> Result<()> {
    let (w, h) = (frame.width, frame.height);
    let mut raw = Vec::with_capacity(w * h * 3);
    for i in 0..w * h {
        for p in &frame.planes {
            raw.push(quantize(p[i], 16) as u16);
        }
    }
    let img: ImageBuffer<Rgb<u16>, Vec<u16>> =
        ImageBuffer::from_raw(w as u32, h as u32, raw).expect("buffer sized to frame");
    img.save_with_format(path, image::ImageFormat::Png)?;
    let mut meta = format!(
        "width={w}\nheight={h}\nbit_depth={}\nprimaries={}\ntransfer={}\nmatrix={}\nrange=full\n",
        frame.spec.bit_depth,
        primaries_str(frame.spec.primaries),
        transfer_str(frame.spec.transfer),
        matrix_str(frame.spec.matrix),
    );
    if value_map != ValueMap::Identity {
        meta.push_str(&format!("value_map={}\n", value_map.as_str()));
    }
    let side = sidecar_path(path);
    fs::write(&side, meta).map_err(|e| Error::io(side, e))
}

struct Sidecar {
    path: PathBuf,
    entries: Vec<(String, String)>,
}

impl Sidecar {
    fn err(&self, key: &str, msg: impl Into<String>) -> Error {
        Error::Sidecar {
            path: self.path.clone(),
            key: key.to_string(),
            msg: msg.into(),
        }
    }

    fn get(&self, key: &str) -> Result<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| self.err(key, "missing required key"))
    }

    fn parse<T>(&self, key: &str, f: impl Fn(&str) -> Option<T>) -> Result<T> {
        let v = self.get(key)?;
        f(v).ok_or_else(|| self.err(key, format!("invalid value `{v}`")))
    }
}

const KNOWN_KEYS: [&str; 8] = [
    "width",
    "height",
    "bit_depth",
    "primaries",
    "transfer",
    "matrix",
    "range",
    "value_map",
];

fn read_sidecar(path: &Path, mode: SidecarMode) -> Result<(ColorimetrySpec, usize, usize, ValueMap)> {
    let side = sidecar_path(path);
    let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let mut entries = Vec::new();
    let sc = |entries| Sidecar {
        path: side.clone(),
        entries,
    };
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(sc(vec![]).err(line, "line is not key=value"));
        };
        let (k, v) = (k.trim(), v.trim());
        if !KNOWN_KEYS.contains(&k) && mode == SidecarMode::Strict {
            return Err(sc(vec![]).err(k, "unknown key"));
        }
        entries.push((k.to_string(), v.to_string()));
    }
    let s = sc(entries);
    let width = s.parse("width", |v| v.parse::<usize>().ok())?;
    let height = s.parse("height", |v| v.parse::<usize>().ok())?;
    let bit_depth = s.parse("bit_depth", |v| {
        v.parse::<u32>().ok().filter(|b| [8, 10, 16].contains(b))
    })?;
    let primaries = s.parse("primaries", |v| match v {
        "bt709" => Some(Primaries::Bt709),
        "bt2020" => Some(Primaries::Bt2020),
        _ => None,
    })?;
    let transfer = s.parse("transfer", |v| match v {
        "gamma24" => Some(Transfer::Gamma24),
        "pq" => Some(Transfer::Pq),
        "hlg" => Some(Transfer::Hlg),
        "linear" => Some(Transfer::Linear),
        _ => None,
    })?;
    let matrix = s.parse("matrix", |v| match v {
        "bt709" => Some(MatrixKind::Bt709),
        "bt2020ncl" => Some(MatrixKind::Bt2020Ncl),
        "identity" => Some(MatrixKind::Identity),
        _ => None,
    })?;
    s.parse("range", |v| (v == "full").then_some(()))?;
    let value_map = if s.entries.iter().any(|(k, _)| k == "value_map") {
        s.parse("value_map", |v| match v {
            "identity" => Some(ValueMap::Identity),
            "detail_half" => Some(ValueMap::DetailHalf),
            "minmax" => Some(ValueMap::MinMax),
            _ => None,
        })?
    } else {
        ValueMap::Identity
    };
    let spec = ColorimetrySpec {
        primaries,
        transfer,
        matrix,
        bit_depth,
    };
    Ok((spec, width, height, value_map))
}

/// Reads a raster and its sidecar. Samples are snapped back to the
/// sidecar's bit depth, so 8- and 10-bit content roundtrips exactly.
pub fn load_frame(path: &Path, mode: SidecarMode) -> Result<(ImageFrame, ValueMap)> {
    let (spec, width, height, value_map) = read_sidecar(path, mode)?;
    let img = image::open(path)?.into_rgb16();
    if img.width() as usize != width || img.height() as usize != height {
        return Err(Error::Sidecar {
            path: sidecar_path(path),
            key: "width".into(),
            msg: format!(
                "sidecar says {width}x{height}, raster is {}x{}",
                img.width(),
                img.height()
            ),
        });
    }
    let mut planes: [Vec<f64>; 3] = Default::default();
    for p in &mut planes {
        p.reserve(width * height);
    }
    for px in img.pixels() {
        for (c, p) in planes.iter_mut().enumerate() {
            let v = dequantize(px[c] as u32, 16);
            p.push(if spec.bit_depth == 16 {
                v
            } else {
                dequantize(quantize(v, spec.bit_depth), spec.bit_depth)
            });
        }
    }
    Ok((ImageFrame::new(width, height, planes, spec)?, value_map))
}
