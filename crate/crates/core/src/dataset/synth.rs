//! Procedural HDR/SDR scene pairs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::colorimetry::{hdr_encode, sdr_encode, ImageFrame, LuminanceFrame, Primaries, HDR_PEAK_NITS, SDR_DIFFUSE_WHITE_NITS};
use crate::error::Result;

/// Global SDR tone curve applied to light relative to diffuse white:
/// identity below `knee`, exponential shoulder above, approaching 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ToneCurve {
    pub knee: f64,
}

impl Default for ToneCurve {
    fn default() -> Self {
        ToneCurve { knee: 0.8 }
    }
}

impl ToneCurve {
    pub fn apply(&self, x: f64) -> f64 {
        let k = self.knee;
        if x <= k {
            x.max(0.0)
        } else {
            k + (1.0 - k) * (1.0 - (-(x - k) / (1.0 - k)).exp())
        }
    }
}

/// Linear BT.709 light of a random scene, 1.0 = 1000 cd/m².
pub fn scene_light(seed: u64, width: usize, height: usize) -> LuminanceFrame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (width as f64, height as f64);
    let n = width * height;
    let mut planes = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];

    // Smooth background gradient in the SDR range.
    let c0: [f64; 3] = std::array::from_fn(|_| rng.gen_range(0.005..0.04));
    let c1: [f64; 3] = std::array::from_fn(|_| rng.gen_range(0.005..0.06));
    let angle: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let (ca, sa) = (angle.cos(), angle.sin());

    // Band-limited texture: a few random sinusoids.
    let waves: Vec<(f64, f64, f64, f64)> = (0..4)
        .map(|_| {
            let f = rng.gen_range(0.05..0.45);
            let th: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            (f * th.cos(), f * th.sin(), rng.gen_range(0.0..std::f64::consts::TAU), rng.gen_range(0.05..0.2))
        })
        .collect();

    for y in 0..height {
        for x in 0..width {
            let t = ((x as f64 / w - 0.5) * ca + (y as f64 / h - 0.5) * sa + 0.5).clamp(0.0, 1.0);
            let tex: f64 = waves
                .iter()
                .map(|(fx, fy, ph, amp)| amp * (fx * x as f64 + fy * y as f64 + ph).sin())
                .sum();
            for c in 0..3 {
                planes[c][y * width + x] = (c0[c] * (1.0 - t) + c1[c] * t) * (1.0 + tex);
            }
        }
    }

    // Shapes: rectangles and discs, some of them highlights.
    let shapes = rng.gen_range(4..9);
    for i in 0..shapes {
        // The topmost shape is always a highlight.
        let bright = i + 1 == shapes || rng.gen_bool(0.35);
        let level = if bright {
            rng.gen_range(0.15..1.0)
        } else {
            rng.gen_range(0.005..0.08)
        };
        let tint: [f64; 3] = std::array::from_fn(|_| rng.gen_range(0.4..1.0));
        let cx = rng.gen_range(0.0..w);
        let cy = rng.gen_range(0.0..h);
        let r = rng.gen_range(0.05..0.3) * w.min(h);
        let disc = rng.gen_bool(0.5);
        for y in 0..height {
            for x in 0..width {
                let (dx, dy) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
                let inside = if disc {
                    dx * dx + dy * dy <= r * r
                } else {
                    dx.abs() <= r && dy.abs() <= 0.6 * r
                };
                if inside {
                    for c in 0..3 {
                        planes[c][y * width + x] = level * tint[c];
                    }
                }
            }
        }
    }
    LuminanceFrame {
        width,
        height,
        planes,
        primaries: Primaries::Bt709,
        peak_nits: HDR_PEAK_NITS,
    }
}

/// An aligned `(hdr, sdr)` frame pair of one random scene. The HDR frame is
/// the PQ/BT.2020/10-bit encoding of the scene light; the SDR frame applies
/// [`ToneCurve`] to light relative to 100 cd/m² diffuse white and encodes
/// it as BT.709/gamma 2.4/8-bit.
pub fn synth_scene(seed: u64, width: usize, height: usize) -> Result<(ImageFrame, ImageFrame)> {
    let light = scene_light(seed, width, height);
    let hdr = hdr_encode(&light)?.frame;
    let curve = ToneCurve::default();
    let rel = HDR_PEAK_NITS / SDR_DIFFUSE_WHITE_NITS;
    let mut tone = light.clone();
    for p in tone.planes.iter_mut() {
        for v in p.iter_mut() {
            *v = curve.apply(*v * rel) / rel;
        }
    }
    let sdr = sdr_encode(&tone, SDR_DIFFUSE_WHITE_NITS)?.frame;
    Ok((hdr, sdr))
}
