//! Transfer functions: BT.1886 gamma 2.4, SMPTE ST 2084 (PQ), BT.2100 HLG.

use crate::error::{Error, Result};

/// Absolute luminance at PQ code value 1.0, in cd/m².
pub const PQ_MAX_NITS: f64 = 10_000.0;

pub const PQ_M1: f64 = 2610.0 / 16384.0;
pub const PQ_M2: f64 = 2523.0 / 4096.0 * 128.0;
pub const PQ_C1: f64 = 3424.0 / 4096.0;
pub const PQ_C2: f64 = 2413.0 / 4096.0 * 32.0;
pub const PQ_C3: f64 = 2392.0 / 4096.0 * 32.0;

const HLG_A: f64 = 0.178_832_77;
const HLG_B: f64 = 1.0 - 4.0 * HLG_A;
// c = 0.5 - a·ln(4a)
const HLG_C: f64 = 0.559_910_729_529_562_3;

const GAMMA: f64 = 2.4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Transfer {
    Gamma24,
    Pq,
    Hlg,
    Linear,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// Linear light to code value (OETF / inverse EOTF).
    Encode,
    /// Code value to linear light.
    Decode,
}

/// Out-of-domain input handling.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Strictness {
    /// Clamp into the valid domain.
    #[default]
    Permissive,
    /// Reject out-of-domain input.
    Strict,
}

pub fn gamma24_decode(v: f64) -> f64 {
    v.powf(GAMMA)
}

pub fn gamma24_encode(l: f64) -> f64 {
    l.powf(1.0 / GAMMA)
}

/// Absolute luminance in cd/m² to PQ code value.
pub fn pq_encode_nits(nits: f64) -> f64 {
    let y = (nits / PQ_MAX_NITS).max(0.0);
    let ym = y.powf(PQ_M1);
    ((PQ_C1 + PQ_C2 * ym) / (1.0 + PQ_C3 * ym)).powf(PQ_M2)
}

/// PQ code value to absolute luminance in cd/m².
pub fn pq_decode_nits(v: f64) -> f64 {
    let p = v.max(0.0).powf(1.0 / PQ_M2);
    let num = (p - PQ_C1).max(0.0);
    let den = PQ_C2 - PQ_C3 * p;
    PQ_MAX_NITS * (num / den).powf(1.0 / PQ_M1)
}

/// BT.2100 HLG OETF on normalized scene light `e ∈ [0, 1]`.
pub fn hlg_encode(e: f64) -> f64 {
    if e <= 1.0 / 12.0 {
        (3.0 * e).sqrt()
    } else {
        HLG_A * (12.0 * e - HLG_B).ln() + HLG_C
    }
}

pub fn hlg_decode(v: f64) -> f64 {
    if v <= 0.5 {
        v * v / 3.0
    } else {
        (((v - HLG_C) / HLG_A).exp() + HLG_B) / 12.0
    }
}

/// Applies a transfer function elementwise.
///
/// Linear values are relative: for PQ, 1.0 corresponds to `peak_nits`; gamma
/// and HLG are relative curves on [0, 1] and ignore `peak_nits`.
pub fn apply_transfer(
    values: &[f64],
    kind: Transfer,
    direction: Direction,
    peak_nits: f64,
    strictness: Strictness,
) -> Result<Vec<f64>> {
    values
        .iter()
        .enumerate()
        .map(|(index, &v)| {
            let v = match (direction, strictness) {
                (Direction::Encode, Strictness::Strict) if v < 0.0 => {
                    return Err(Error::NegativeInput { index, value: v })
                }
                (Direction::Decode, Strictness::Strict) if !(0.0..=1.0).contains(&v) => {
                    return Err(Error::invalid(
                        "apply_transfer",
                        format!("code value {v} at element {index} outside [0, 1]"),
                    ))
                }
                (Direction::Encode, _) => v.max(0.0),
                (Direction::Decode, _) => v.clamp(0.0, 1.0),
            };
            Ok(transfer_scalar(v, kind, direction, peak_nits))
        })
        .collect()
}

/// Scalar form of [`apply_transfer`] without domain checks.
pub fn transfer_scalar(v: f64, kind: Transfer, direction: Direction, peak_nits: f64) -> f64 {
    match (kind, direction) {
        (Transfer::Linear, _) => v,
        (Transfer::Gamma24, Direction::Encode) => gamma24_encode(v),
        (Transfer::Gamma24, Direction::Decode) => gamma24_decode(v),
        (Transfer::Pq, Direction::Encode) => pq_encode_nits(v * peak_nits),
        (Transfer::Pq, Direction::Decode) => pq_decode_nits(v) / peak_nits,
        (Transfer::Hlg, Direction::Encode) => hlg_encode(v),
        (Transfer::Hlg, Direction::Decode) => hlg_decode(v),
    }
}
