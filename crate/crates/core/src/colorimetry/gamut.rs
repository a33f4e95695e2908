//! RGB primaries and the linear-light gamut matrices between them, derived
//! from chromaticity coordinates and the D65 white point.

use nalgebra::{Matrix3, Vector3};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Primaries {
    Bt709,
    Bt2020,
}

const D65: (f64, f64) = (0.3127, 0.3290);

impl Primaries {
    /// (x, y) chromaticities of R, G, B.
    pub fn chromaticities(self) -> [(f64, f64); 3] {
        match self {
            Primaries::Bt709 => [(0.64, 0.33), (0.30, 0.60), (0.15, 0.06)],
            Primaries::Bt2020 => [(0.708, 0.292), (0.170, 0.797), (0.131, 0.046)],
        }
    }
}

fn xyz(x: f64, y: f64) -> Vector3<f64> {
    Vector3::new(x / y, 1.0, (1.0 - x - y) / y)
}

/// Linear RGB → CIE XYZ, normalized so RGB white maps to Y = 1.
pub fn rgb_to_xyz(p: Primaries) -> Matrix3<f64> {
    let [r, g, b] = p.chromaticities();
    let m = Matrix3::from_columns(&[xyz(r.0, r.1), xyz(g.0, g.1), xyz(b.0, b.1)]);
    let white = xyz(D65.0, D65.1);
    let s = m
        .try_inverse()
        .expect("primaries are linearly independent")
        * white;
    m * Matrix3::from_diagonal(&s)
}

/// 3×3 matrix taking linear RGB in `from` primaries to `to` primaries.
pub fn gamut_matrix(from: Primaries, to: Primaries) -> Matrix3<f64> {
    if from == to {
        return Matrix3::identity();
    }
    rgb_to_xyz(to).try_inverse().expect("invertible") * rgb_to_xyz(from)
}

/// Converts linear RGB planes in place. Identical primaries leave the
/// planes untouched.
pub fn gamut_convert(planes: &mut [Vec<f64>; 3], from: Primaries, to: Primaries) {
    if from == to {
        return;
    }
    let m = gamut_matrix(from, to);
    let [r, g, b] = planes;
    for ((r, g), b) in r.iter_mut().zip(g.iter_mut()).zip(b.iter_mut()) {
        let v = m * Vector3::new(*r, *g, *b);
        (*r, *g, *b) = (v[0], v[1], v[2]);
    }
}
