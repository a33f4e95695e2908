//! Deterministic inputs shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sritm_core::{Element, Tensor};

/// Tensor of `shape` with values uniform in `[lo, hi)`.
pub fn uniform<T: Element>(shape: &[usize], seed: u64, lo: f64, hi: f64) -> Tensor<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn(shape, |_| T::from_f64(rng.gen_range(lo..hi)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_is_deterministic_and_bounded() {
        let a: Tensor<f32> = uniform(&[2, 3, 4, 4], 1, 0.25, 0.5);
        assert_eq!(a, uniform(&[2, 3, 4, 4], 1, 0.25, 0.5));
        assert!(a.data().iter().all(|v| (0.25..0.5).contains(v)));
    }
}
