/// Largest code value at `bits`.
pub fn max_code(bits: u32) -> u32 {
    (1u32 << bits) - 1
}

/// `round(v·(2^bits − 1))`, half away from zero, clamped to the code range.
pub fn quantize(v: f64, bits: u32) -> u32 {
    let max = max_code(bits) as f64;
    (v * max).round().clamp(0.0, max) as u32
}

pub fn dequantize(code: u32, bits: u32) -> f64 {
    code as f64 / max_code(bits) as f64
}

/// Snaps a normalized value to the nearest representable code value.
pub fn requantize(v: f64, bits: u32) -> f64 {
    dequantize(quantize(v, bits), bits)
}
