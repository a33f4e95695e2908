//! Full-range R'G'B' ↔ Y'CbCr with chroma offset 0.5.

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MatrixKind {
    Bt709,
    Bt2020Ncl,
    /// Planes hold R'G'B' directly.
    Identity,
}

impl MatrixKind {
    /// (Kr, Kb) luma coefficients.
    pub fn coefficients(self) -> Option<(f64, f64)> {
        match self {
            MatrixKind::Bt709 => Some((0.2126, 0.0722)),
            MatrixKind::Bt2020Ncl => Some((0.2627, 0.0593)),
            MatrixKind::Identity => None,
        }
    }
}

pub fn rgb_to_ycbcr(rgb: [f64; 3], kind: MatrixKind) -> [f64; 3] {
    let Some((kr, kb)) = kind.coefficients() else {
        return rgb;
    };
    let kg = 1.0 - kr - kb;
    let [r, g, b] = rgb;
    let y = kr * r + kg * g + kb * b;
    [
        y,
        (b - y) / (2.0 * (1.0 - kb)) + 0.5,
        (r - y) / (2.0 * (1.0 - kr)) + 0.5,
    ]
}

pub fn ycbcr_to_rgb(ycc: [f64; 3], kind: MatrixKind) -> [f64; 3] {
    let Some((kr, kb)) = kind.coefficients() else {
        return ycc;
    };
    let kg = 1.0 - kr - kb;
    let [y, cb, cr] = ycc;
    let r = y + 2.0 * (1.0 - kr) * (cr - 0.5);
    let b = y + 2.0 * (1.0 - kb) * (cb - 0.5);
    let g = (y - kr * r - kb * b) / kg;
    [r, g, b]
}

/// Converts three planes in place. With `clamp`, results are clamped to
/// [0, 1] and the number of clamped samples is returned.
pub fn ycbcr_convert(
    planes: &mut [Vec<f64>; 3],
    kind: MatrixKind,
    to_ycbcr: bool,
    clamp: bool,
) -> usize {
    let mut clamped = 0;
    let [a, b, c] = planes;
    for ((a, b), c) in a.iter_mut().zip(b.iter_mut()).zip(c.iter_mut()) {
        let out = if to_ycbcr {
            rgb_to_ycbcr([*a, *b, *c], kind)
        } else {
            ycbcr_to_rgb([*a, *b, *c], kind)
        };
        let out = out.map(|v| {
            if clamp && !(0.0..=1.0).contains(&v) {
                clamped += 1;
                v.clamp(0.0, 1.0)
            } else {
                v
            }
        });
        (*a, *b, *c) = (out[0], out[1], out[2]);
    }
    clamped
}
