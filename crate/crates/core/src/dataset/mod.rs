//! Training pairs: frame sampling, patch extraction, synthetic scenes and
//! binary shards.

mod synth;

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use synth::{scene_light, synth_scene, ToneCurve};

use crate::binio::{Reader, Writer};
use crate::colorimetry::{load_frame, ColorimetrySpec, ImageFrame, SidecarMode};
use crate::error::{Error, Result};
use crate::optim::name_seed;
use crate::tensor::{resize_bicubic, Scale, Tensor};

pub const SHARD_MAGIC: &[u8] = b"SRDS\x01";

/// One training pair, both patches as normalized YCbCr code values.
#[derive(Clone, Debug, PartialEq)]
pub struct PairSample {
    /// `(3, p/sf, p/sf)` SDR input.
    pub lr_sdr: Tensor<f32>,
    /// `(3, p, p)` HDR target.
    pub hr_hdr: Tensor<f32>,
    pub frame_id: u32,
    /// Crop origin `(x, y)` on the HR grid.
    pub origin: (u32, u32),
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSpec {
    /// Patch edge on the HR grid.
    pub patch_size: usize,
    pub patches_per_frame: (usize, usize),
    pub frame_stride: (usize, usize),
    pub sf: usize,
    pub seed: u64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec {
            patch_size: 160,
            patches_per_frame: (20, 40),
            frame_stride: (10, 80),
            sf: 2,
            seed: 0,
        }
    }
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.sf == 0 || self.patch_size == 0 || self.patch_size % self.sf != 0 {
            return Err(Error::Config(format!(
                "patch_size {} must be a positive multiple of sf {}",
                self.patch_size, self.sf
            )));
        }
        for (name, (lo, hi)) in [("patches_per_frame", self.patches_per_frame), ("frame_stride", self.frame_stride)] {
            if lo > hi || hi == 0 {
                return Err(Error::Config(format!("{name} range [{lo},{hi}] is empty")));
            }
        }
        Ok(())
    }
}

/// Indices visited by a seeded walk `0, 0 + s₁, …` with `sᵢ` uniform in
/// the stride range.
pub fn sample_frames(frame_count: usize, spec: &DatasetSpec) -> Result<Vec<usize>> {
    spec.validate()?;
    if frame_count == 0 {
        return Err(Error::Dataset("no frames to sample".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (lo, hi) = spec.frame_stride;
    let mut out = vec![0];
    loop {
        let next = out[out.len() - 1] + rng.gen_range(lo.max(1)..=hi);
        if next >= frame_count {
            return Ok(out);
        }
        out.push(next);
    }
}

/// Random sf-aligned crops of an aligned HDR/SDR frame pair.
pub fn extract_pairs(hdr: &ImageFrame, sdr: &ImageFrame, frame_id: u32, spec: &DatasetSpec) -> Result<Vec<PairSample>> {
    spec.validate()?;
    hdr.spec.expect(&ColorimetrySpec::HDR)?;
    sdr.spec.expect(&ColorimetrySpec::SDR)?;
    if (hdr.width, hdr.height) != (sdr.width, sdr.height) {
        return Err(Error::shape("extract_pairs", &[hdr.height, hdr.width], &[sdr.height, sdr.width]));
    }
    let p = spec.patch_size;
    if hdr.width < p || hdr.height < p {
        return Err(Error::Dataset(format!(
            "frame {frame_id} is {}x{}, smaller than patch size {p}",
            hdr.width, hdr.height
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(name_seed(spec.seed, &format!("frame{frame_id}")));
    let count = rng.gen_range(spec.patches_per_frame.0..=spec.patches_per_frame.1);
    let sf = spec.sf;
    let (nx, ny) = ((hdr.width - p) / sf, (hdr.height - p) / sf);
    (0..count)
        .map(|_| {
            let x = sf * rng.gen_range(0..=nx);
            let y = sf * rng.gen_range(0..=ny);
            let hr = hdr.crop(x, y, p, p)?.to_tensor::<f64>();
            let sd = sdr.crop(x, y, p, p)?.to_tensor::<f64>();
            let lr = resize_bicubic(&sd, Scale::down(sf), true)?.map(|v| v.clamp(0.0, 1.0));
            Ok(PairSample {
                lr_sdr: lr.cast::<f32>().reshape(&[3, p / sf, p / sf])?,
                hr_hdr: hr.cast::<f32>().reshape(&[3, p, p])?,
                frame_id,
                origin: (x as u32, y as u32),
            })
        })
        .collect()
}

/// Pairs from `scenes` synthetic scenes of `size × size`, frame ids `0..scenes`.
pub fn synthetic_pairs(scenes: usize, size: usize, spec: &DatasetSpec) -> Result<Vec<PairSample>> {
    let per: Vec<Result<Vec<PairSample>>> = (0..scenes)
        .into_par_iter()
        .map(|i| {
            let (hdr, sdr) = synth_scene(name_seed(spec.seed, &format!("scene{i}")), size, size)?;
            extract_pairs(&hdr, &sdr, i as u32, spec)
        })
        .collect();
    let mut out = Vec::new();
    for p in per {
        out.extend(p?);
    }
    Ok(out)
}

/// Same-named `*.png` frames (with sidecars) from two directories, sorted.
pub fn load_frame_pairs(hdr_dir: &Path, sdr_dir: &Path) -> Result<Vec<(PathBuf, ImageFrame, ImageFrame)>> {
    let mut names = Vec::new();
    for e in std::fs::read_dir(hdr_dir).map_err(|e| Error::io(hdr_dir, e))? {
        let p = e.map_err(|e| Error::io(hdr_dir, e))?.path();
        if p.extension().is_some_and(|x| x == "png") {
            names.push(p.file_name().unwrap().to_owned());
        }
    }
    names.sort();
    if names.is_empty() {
        return Err(Error::Dataset(format!("no frames in {}", hdr_dir.display())));
    }
    names
        .into_iter()
        .map(|n| {
            let (hdr, _) = load_frame(&hdr_dir.join(&n), SidecarMode::Strict)?;
            let sdr_path = sdr_dir.join(&n);
            if !sdr_path.exists() {
                return Err(Error::Dataset(format!("no SDR counterpart for {}", n.to_string_lossy())));
            }
            let (sdr, _) = load_frame(&sdr_path, SidecarMode::Strict)?;
            Ok((sdr_path, hdr, sdr))
        })
        .collect()
}

/// Stacks samples into `(B, 3, h, w)` input and `(B, 3, sf·h, sf·w)` target batches.
pub fn collate(samples: &[&PairSample]) -> Result<(Tensor<f32>, Tensor<f32>)> {
    let lr: Vec<&Tensor<f32>> = samples.iter().map(|s| &s.lr_sdr).collect();
    let hr: Vec<&Tensor<f32>> = samples.iter().map(|s| &s.hr_hdr).collect();
    Ok((Tensor::stack(&lr)?, Tensor::stack(&hr)?))
}

pub fn shard_bytes(samples: &[PairSample]) -> Vec<u8> {
    let mut w = Writer::new();
    w.bytes(SHARD_MAGIC);
    w.u32(samples.len() as u32);
    for s in samples {
        w.u32(s.frame_id);
        w.u32(s.origin.0);
        w.u32(s.origin.1);
        w.tensor(&s.lr_sdr);
        w.tensor(&s.hr_hdr);
    }
    w.buf
}

pub fn write_shard(samples: &[PairSample], path: &Path) -> Result<()> {
    std::fs::write(path, shard_bytes(samples)).map_err(|e| Error::io(path, e))
}

pub fn parse_shard(bytes: &[u8]) -> Result<Vec<PairSample>> {
    let mut r = Reader::new("shard", bytes);
    r.magic(SHARD_MAGIC)?;
    let count = r.u32("sample count")? as usize;
    let mut out = Vec::with_capacity(count.min(1 << 16));
    for i in 0..count {
        let at = format!("sample {i}");
        let frame_id = r.u32(&at)?;
        let origin = (r.u32(&at)?, r.u32(&at)?);
        let lr_sdr = r.tensor(&format!("{at} LR patch"))?;
        let hr_hdr = r.tensor(&format!("{at} HR patch"))?;
        if lr_sdr.rank() != 3 || hr_hdr.rank() != 3 {
            return Err(Error::Dataset(format!("{at}: patches must be rank 3")));
        }
        out.push(PairSample {
            lr_sdr,
            hr_hdr,
            frame_id,
            origin,
        });
    }
    if !r.at_end() {
        return Err(Error::Truncated {
            what: "shard",
            offset: r.offset() as u64,
            detail: format!("trailing bytes after {count} samples"),
        });
    }
    Ok(out)
}

pub fn read_shard(path: &Path) -> Result<Vec<PairSample>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_shard(&bytes)
}
