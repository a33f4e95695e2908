//! Built-in verification suites: parameter counts, finite-difference
//! gradient checks and cross-checks of fast kernels against naive ones.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::decomposition::guided_filter_plane;
use crate::error::Result;
use crate::gradcheck::check_gradients;
use crate::metrics::{gaussian_window, ssim, SSIM_K1, SSIM_K2, SSIM_WINDOW};
use crate::network::{
    is_bias, res_block, res_mod_block, res_skip_block, res_skip_mod_block, Architecture, BlockKind, ConvSpec,
    NetworkConfig, Scope, WeightStore,
};
use crate::tensor::kernels::conv2d_forward;
use crate::tensor::Tensor;
use crate::Network;

/// Accepted parameter-count ranges per scale factor.
pub const PARAM_RANGES: [(usize, usize, usize); 2] = [(2, 2_400_000, 2_600_000), (4, 2_530_000, 2_750_000)];
/// Gradient checks pass below this relative error.
pub const GRAD_TOLERANCE: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for CheckResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{verdict}] {}: {}", self.name, self.detail)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    ParamCount,
    GradCheck,
    Oracles,
}

impl Suite {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "paramcount" => Some(Suite::ParamCount),
            "gradcheck" => Some(Suite::GradCheck),
            "oracles" => Some(Suite::Oracles),
            _ => None,
        }
    }

    pub fn run(self) -> Result<Vec<CheckResult>> {
        match self {
            Suite::ParamCount => paramcount_suite(),
            Suite::GradCheck => gradcheck_suite(),
            Suite::Oracles => oracles_suite(),
        }
    }
}

pub fn paramcount_suite() -> Result<Vec<CheckResult>> {
    PARAM_RANGES
        .iter()
        .map(|&(sf, lo, hi)| {
            let n = Architecture::from_config(&NetworkConfig::full(sf))?.param_count();
            Ok(CheckResult {
                name: format!("params sf={sf}"),
                passed: (lo..=hi).contains(&n),
                detail: format!("{n} (accepted {lo}..={hi})"),
            })
        })
        .collect()
}

fn random(shape: &[usize], rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.gen_range(lo..hi))
}

fn randomize_biases(store: &mut WeightStore<f64>, rng: &mut ChaCha8Rng) {
    for (n, t) in store.map_mut().iter_mut() {
        if is_bias(n) {
            *t = random(t.shape(), rng, -0.1, 0.1);
        }
    }
}

fn grad_result(name: String, err: f64, checked: usize) -> CheckResult {
    CheckResult {
        name,
        passed: err < GRAD_TOLERANCE,
        detail: format!("max rel err {err:.3e} over {checked} elements"),
    }
}

/// Every block type and the toy network, in f64 on 8×8 inputs.
pub fn gradcheck_suite() -> Result<Vec<CheckResult>> {
    let c = 3;
    let mut rng = ChaCha8Rng::seed_from_u64(0x6772_6164);
    let conv = |name: &str, c_in, c_out, k| ConvSpec {
        name: name.into(),
        c_in,
        c_out,
        k,
    };
    let specs = [
        conv("blk.conv1", c, c, 3),
        conv("blk.conv2", c, c, 3),
        conv("blk.dr", 2 * c, c, 1),
        conv("blk.mod.conv1", c, c, 3),
        conv("blk.mod.conv2", c, c, 3),
    ];
    let mut store = WeightStore::<f64>::xavier(&specs, 11)?;
    randomize_biases(&mut store, &mut rng);
    let names: Vec<String> = store.names().cloned().collect();
    let mut inputs = vec![
        random(&[1, c, 8, 8], &mut rng, -1.0, 1.0),
        random(&[1, c, 8, 8], &mut rng, -1.0, 1.0),
        random(&[1, c, 8, 8], &mut rng, 0.0, 1.0),
    ];
    inputs.extend(names.iter().map(|n| store.get(n).expect("listed").clone()));

    let mut out = Vec::new();
    for kind in [BlockKind::Res, BlockKind::ResMod, BlockKind::ResSkip, BlockKind::ResSkipMod] {
        let r = check_gradients(&inputs, |t, v| {
            let mut sc = Scope::new(&store, true);
            for (n, &var) in names.iter().zip(&v[3..]) {
                sc.bind(n, var);
            }
            let y = match kind {
                BlockKind::Res => res_block(t, &mut sc, "blk", v[0])?,
                BlockKind::ResMod => res_mod_block(t, &mut sc, "blk", v[0], v[2])?.0,
                BlockKind::ResSkip => res_skip_block(t, &mut sc, "blk", v[0], v[1])?,
                BlockKind::ResSkipMod => res_skip_mod_block(t, &mut sc, "blk", v[0], v[1], v[2])?.0,
            };
            let sq = t.mul(y, y)?;
            t.sum(sq)
        })?;
        out.push(grad_result(format!("{kind:?}"), r.max_rel_err, r.checked));
    }

    let mut net = Network::<f64>::build_toy(NetworkConfig::toy(2).with_width(2), 17)?;
    randomize_biases(net.weights_mut(), &mut rng);
    let x = random(&[1, 3, 8, 8], &mut rng, 0.05, 0.95);
    let target = random(&[1, 3, 16, 16], &mut rng, 0.0, 1.0);
    let names: Vec<String> = net.weights().names().cloned().collect();
    let inputs: Vec<Tensor<f64>> = names
        .iter()
        .map(|n| net.weights().get(n).expect("listed").clone())
        .collect();
    let r = check_gradients(&inputs, |t, v| {
        let mut sc = Scope::new(net.weights(), true);
        for (n, &var) in names.iter().zip(v) {
            sc.bind(n, var);
        }
        let f = net.forward_tape(t, &mut sc, &x)?;
        let tv = t.constant(target.clone());
        t.mse_loss(f.output, tv)
    })?;
    out.push(grad_result("toy network".into(), r.max_rel_err, r.checked));
    Ok(out)
}

fn naive_conv(x: &Tensor<f64>, w: &Tensor<f64>, b: &Tensor<f64>) -> Vec<f64> {
    let (n, ci, h, wd) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
    let (co, k) = (w.shape()[0], w.shape()[2]);
    let pad = (k / 2) as isize;
    let mut out = Vec::with_capacity(n * co * h * wd);
    for b_ in 0..n {
        for o in 0..co {
            for y in 0..h as isize {
                for xx in 0..wd as isize {
                    let mut acc = b.data()[o];
                    for i in 0..ci {
                        for ky in 0..k as isize {
                            for kx in 0..k as isize {
                                let (sy, sx) = (y + ky - pad, xx + kx - pad);
                                if sy < 0 || sx < 0 || sy >= h as isize || sx >= wd as isize {
                                    continue;
                                }
                                let xv = x.data()[((b_ * ci + i) * h + sy as usize) * wd + sx as usize];
                                let wv = w.data()[((o * ci + i) * k + ky as usize) * k + kx as usize];
                                acc += xv * wv;
                            }
                        }
                    }
                    out.push(acc);
                }
            }
        }
    }
    out
}

fn naive_guided_filter(p: &[f64], w: usize, h: usize, r: usize, eps: f64) -> Vec<f64> {
    let mean = |f: &dyn Fn(usize) -> f64, x: usize, y: usize| {
        let (mut s, mut n) = (0.0, 0.0);
        for yy in y.saturating_sub(r)..(y + r + 1).min(h) {
            for xx in x.saturating_sub(r)..(x + r + 1).min(w) {
                s += f(yy * w + xx);
                n += 1.0;
            }
        }
        s / n
    };
    let mut a = vec![0.0; w * h];
    let mut b = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let m = mean(&|i| p[i], x, y);
            let var = mean(&|i| p[i] * p[i], x, y) - m * m;
            a[y * w + x] = var / (var + eps);
            b[y * w + x] = m - a[y * w + x] * m;
        }
    }
    (0..w * h)
        .map(|i| {
            let (x, y) = (i % w, i / w);
            mean(&|j| a[j], x, y) * p[i] + mean(&|j| b[j], x, y)
        })
        .collect()
}

fn naive_ssim(a: &[f64], b: &[f64], w: usize, h: usize) -> f64 {
    let g = gaussian_window();
    let (c1, c2) = ((SSIM_K1).powi(2), (SSIM_K2).powi(2));
    let mut total = 0.0;
    let mut count = 0.0;
    for y in 0..=h - SSIM_WINDOW {
        for x in 0..=w - SSIM_WINDOW {
            let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for dy in 0..SSIM_WINDOW {
                for dx in 0..SSIM_WINDOW {
                    let wt = g[dy] * g[dx];
                    let (va, vb) = (a[(y + dy) * w + x + dx], b[(y + dy) * w + x + dx]);
                    ma += wt * va;
                    mb += wt * vb;
                    saa += wt * va * va;
                    sbb += wt * vb * vb;
                    sab += wt * va * vb;
                }
            }
            let (va, vb, cov) = (saa - ma * ma, sbb - mb * mb, sab - ma * mb);
            total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            count += 1.0;
        }
    }
    total / count
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn oracle_result(name: &str, err: f64, tol: f64) -> CheckResult {
    CheckResult {
        name: name.into(),
        passed: err <= tol,
        detail: format!("max abs diff {err:.3e} (tolerance {tol:.0e})"),
    }
}

/// Convolution, guided filter and SSIM against direct implementations.
pub fn oracles_suite() -> Result<Vec<CheckResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6f72_6163);
    let mut out = Vec::new();

    let mut conv_err = 0.0_f64;
    for k in [1, 3] {
        let x = random(&[2, 3, 9, 7], &mut rng, -1.0, 1.0);
        let w = random(&[4, 3, k, k], &mut rng, -1.0, 1.0);
        let b = random(&[4], &mut rng, -1.0, 1.0);
        let fast = conv2d_forward(&x, &w, &b)?;
        conv_err = conv_err.max(max_abs_diff(fast.data(), &naive_conv(&x, &w, &b)));
    }
    out.push(oracle_result("conv2d", conv_err, 1e-12));

    let (w, h) = (23, 17);
    let p: Vec<f64> = (0..w * h).map(|_| rng.gen_range(0.0..1.0)).collect();
    let mut gf_err = 0.0_f64;
    for (r, eps) in [(1, 1e-3), (2, 1e-2), (5, 1e-2)] {
        let fast = guided_filter_plane(&p, &p, w, h, r, eps);
        gf_err = gf_err.max(max_abs_diff(&fast, &naive_guided_filter(&p, w, h, r, eps)));
    }
    out.push(oracle_result("guided filter", gf_err, 1e-6));

    let (w, h) = (24, 20);
    let a: Vec<f64> = (0..w * h).map(|_| rng.gen_range(0.0..1.0)).collect();
    let b: Vec<f64> = a.iter().map(|v| (v + rng.gen_range(-0.1..0.1)).clamp(0.0, 1.0)).collect();
    let err = (ssim(&a, &b, w, h)? - naive_ssim(&a, &b, w, h)).abs();
    out.push(oracle_result("ssim", err, 1e-8));
    Ok(out)
}
