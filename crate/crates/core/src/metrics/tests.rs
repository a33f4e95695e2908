use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::colorimetry::{save_frame, ColorimetrySpec, ImageFrame, Primaries, ValueMap};

fn rand_vec(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen::<f64>()).collect()
}

fn lum(w: usize, h: usize, planes: [Vec<f64>; 3]) -> LuminanceFrame {
    LuminanceFrame::new(w, h, planes, Primaries::Bt2020, 1000.0).unwrap()
}

#[test]
fn psnr_examples() {
    let a = vec![0.3; 12];
    assert_eq!(psnr(&a, &a, 1.0).unwrap(), PSNR_IDENTICAL);
    assert_eq!(psnr(&[1.0; 8], &[0.0; 8], 1.0).unwrap(), 0.0);
    let b: Vec<f64> = a.iter().map(|v| v + 0.1).collect();
    assert!((psnr(&a, &b, 1.0).unwrap() - 20.0).abs() < 1e-9);
    assert!(psnr(&a, &b[..5], 1.0).is_err());
}

#[test]
fn psnr_symmetric_and_monotone() {
    let a = rand_vec(64, 1);
    let e = rand_vec(64, 2);
    let b: Vec<f64> = a.iter().zip(&e).map(|(x, d)| x + 0.05 * (d - 0.5)).collect();
    let c: Vec<f64> = a.iter().zip(&e).map(|(x, d)| x + 0.1 * (d - 0.5)).collect();
    assert_eq!(psnr(&a, &b, 1.0).unwrap(), psnr(&b, &a, 1.0).unwrap());
    assert!(psnr(&a, &c, 1.0).unwrap() < psnr(&a, &b, 1.0).unwrap());
}

/// Materializes every exposed, quantized image before comparing.
fn mpsnr_oracle(a: &[f64], b: &[f64], quantize: bool) -> f64 {
    let mut total = 0.0;
    for c in -3..=3 {
        let mut ia = Vec::new();
        let mut ib = Vec::new();
        for &v in a {
            let mut e = (2f64.powi(c) * v).powf(1.0 / 2.2).min(1.0).max(0.0);
            if quantize {
                e = (e * 1023.0).round() / 1023.0;
            }
            ia.push(e);
        }
        for &v in b {
            let mut e = (2f64.powi(c) * v).powf(1.0 / 2.2).min(1.0).max(0.0);
            if quantize {
                e = (e * 1023.0).round() / 1023.0;
            }
            ib.push(e);
        }
        let mut se = 0.0;
        for i in 0..ia.len() {
            se += (ia[i] - ib[i]).powi(2);
        }
        total += 10.0 * (1.0 / (se / ia.len() as f64)).log10();
    }
    total / 7.0
}

fn planes_of(v: &[f64], n: usize) -> [Vec<f64>; 3] {
    [v[..n].to_vec(), v[n..2 * n].to_vec(), v[2 * n..].to_vec()]
}

#[test]
fn mpsnr_matches_oracle() {
    let a = rand_vec(48, 3);
    let b: Vec<f64> = a.iter().zip(rand_vec(48, 4)).map(|(x, d)| (x + 0.2 * (d - 0.5)).abs()).collect();
    let fa = lum(4, 4, planes_of(&a, 16));
    let fb = lum(4, 4, planes_of(&b, 16));
    let got = mpsnr(&fa, &fb).unwrap();
    assert!((got - mpsnr_oracle(&a, &b, true)).abs() < 1e-8);
    let unq = mpsnr_with(&fa, &fb, &MpsnrOptions { bits: None, ..Default::default() }).unwrap();
    assert!((unq - mpsnr_oracle(&a, &b, false)).abs() < 1e-8);
    assert_ne!(got, unq, "quantization must matter");
    assert_eq!(mpsnr(&fa, &fa).unwrap(), PSNR_IDENTICAL);
    assert_eq!(MPSNR_EXPOSURES.len(), 7);
}

#[test]
fn mpsnr_ignores_pixels_clipped_at_every_exposure() {
    let a = rand_vec(48, 5);
    let mut b: Vec<f64> = a.iter().map(|v| v * 0.9).collect();
    let mut a2 = a.clone();
    // Pixels ≥ 8 saturate even at -3 stops.
    a2[0] = 9.0;
    b[0] = 8.5;
    let base = {
        let mut bb = b.clone();
        bb[0] = 9.0;
        mpsnr(&lum(4, 4, planes_of(&a2, 16)), &lum(4, 4, planes_of(&bb, 16))).unwrap()
    };
    let got = mpsnr(&lum(4, 4, planes_of(&a2, 16)), &lum(4, 4, planes_of(&b, 16))).unwrap();
    assert_eq!(got, base);
}

#[test]
fn mpsnr_strict_rejects_negative() {
    let mut a = rand_vec(48, 6);
    a[3] = -0.1;
    let fa = lum(4, 4, planes_of(&a, 16));
    let opts = MpsnrOptions { strict: true, ..Default::default() };
    assert!(matches!(mpsnr_with(&fa, &fa, &opts), Err(Error::NegativeInput { .. })));
}

/// Direct per-window SSIM with a 2-D Gaussian.
fn ssim_oracle(a: &[f64], b: &[f64], w: usize, h: usize) -> (f64, f64) {
    let mut k = [[0.0; 11]; 11];
    let mut s = 0.0;
    for (y, row) in k.iter_mut().enumerate() {
        for (x, v) in row.iter_mut().enumerate() {
            let (dx, dy) = (x as f64 - 5.0, y as f64 - 5.0);
            *v = (-(dx * dx + dy * dy) / (2.0 * 1.5 * 1.5)).exp();
            s += *v;
        }
    }
    let (c1, c2) = (0.0001, 0.0009);
    let (mut tot, mut tot_cs, mut n) = (0.0, 0.0, 0.0);
    for y0 in 0..=h - 11 {
        for x0 in 0..=w - 11 {
            let (mut ma, mut mb) = (0.0, 0.0);
            for y in 0..11 {
                for x in 0..11 {
                    let i = (y0 + y) * w + x0 + x;
                    ma += k[y][x] / s * a[i];
                    mb += k[y][x] / s * b[i];
                }
            }
            let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
            for y in 0..11 {
                for x in 0..11 {
                    let i = (y0 + y) * w + x0 + x;
                    let g = k[y][x] / s;
                    va += g * (a[i] - ma) * (a[i] - ma);
                    vb += g * (b[i] - mb) * (b[i] - mb);
                    cov += g * (a[i] - ma) * (b[i] - mb);
                }
            }
            let cs = (2.0 * cov + c2) / (va + vb + c2);
            tot += (2.0 * ma * mb + c1) / (ma * ma + mb * mb + c1) * cs;
            tot_cs += cs;
            n += 1.0;
        }
    }
    (tot / n, tot_cs / n)
}

#[test]
fn ssim_matches_oracle() {
    let a = rand_vec(256, 7);
    let b: Vec<f64> = a.iter().zip(rand_vec(256, 8)).map(|(x, d)| 0.7 * x + 0.3 * d).collect();
    let got = ssim_parts(&a, &b, 16, 16).unwrap();
    let (s, cs) = ssim_oracle(&a, &b, 16, 16);
    assert!((got.ssim - s).abs() < 1e-8, "{} vs {s}", got.ssim);
    assert!((got.cs - cs).abs() < 1e-8);
    assert_eq!(ssim(&a, &b, 16, 16).unwrap(), ssim(&b, &a, 16, 16).unwrap());
}

#[test]
fn ssim_examples() {
    let a = rand_vec(20 * 14, 9);
    assert_eq!(ssim(&a, &a, 20, 14).unwrap(), 1.0);
    let inv: Vec<f64> = a.iter().map(|v| 1.0 - v).collect();
    assert!(ssim(&a, &inv, 20, 14).unwrap() < 1.0);
    assert!(ssim(&a[..100], &a[..100], 10, 10).is_err());
}

#[test]
fn ms_ssim_examples() {
    let total: f64 = MS_SSIM_WEIGHTS.iter().sum();
    assert!((total - 1.0001).abs() < 1e-12);
    let a = rand_vec(176 * 180, 10);
    assert_eq!(ms_ssim(&a, &a, 176, 180, false).unwrap(), MsSsim { value: 1.0, scales: 5 });
    assert!(ms_ssim(&a[..100 * 100], &a[..100 * 100], 100, 100, false).is_err());
}

#[test]
fn ms_ssim_matches_composition() {
    let (w, h) = (50, 46);
    let a = rand_vec(w * h, 11);
    let b: Vec<f64> = a.iter().zip(rand_vec(w * h, 12)).map(|(x, d)| 0.8 * x + 0.2 * d).collect();
    let got = ms_ssim(&a, &b, w, h, true).unwrap();
    assert_eq!(got.scales, 3);
    // Straight-line composition: three scales, weights renormalized.
    let wsum = MS_SSIM_WEIGHTS[0] + MS_SSIM_WEIGHTS[1] + MS_SSIM_WEIGHTS[2];
    let s1 = ssim_oracle(&a, &b, w, h);
    let (a2, w2, h2) = downsample2(&a, w, h);
    let (b2, _, _) = downsample2(&b, w, h);
    let s2 = ssim_oracle(&a2, &b2, w2, h2);
    let (a3, w3, h3) = downsample2(&a2, w2, h2);
    let (b3, _, _) = downsample2(&b2, w2, h2);
    let s3 = ssim_oracle(&a3, &b3, w3, h3);
    let expect = s1.1.powf(MS_SSIM_WEIGHTS[0] / wsum)
        * s2.1.powf(MS_SSIM_WEIGHTS[1] / wsum)
        * s3.0.powf(MS_SSIM_WEIGHTS[2] / wsum);
    assert!((got.value - expect).abs() < 1e-8);
}

#[test]
fn aggregation() {
    assert_eq!(mean_std(&[30.0, 40.0]), (35.0, 5.0));
    assert_eq!(mean_std(&[31.5]), (31.5, 0.0));
    assert_eq!(mean_std(&[f64::INFINITY, f64::INFINITY]), (f64::INFINITY, 0.0));
    let mut r = MetricReport::default();
    r.insert("psnr", "a", 30.0);
    r.insert("psnr", "b", 40.0);
    let kv = r.to_kv();
    assert!(kv.contains("psnr.pair.a=30\n") && kv.contains("psnr.mean=35\n") && kv.contains("psnr.std=5\n"));
}

fn write_hdr(dir: &std::path::Path, name: &str, seed: u64) {
    let (w, h) = (24, 20);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let planes = [0, 1, 2].map(|_| (0..w * h).map(|_| rng.gen_range(0.1..0.7)).collect());
    let f = ImageFrame::new(w, h, planes, ColorimetrySpec::HDR).unwrap().quantized();
    save_frame(&f, &dir.join(name), ValueMap::Identity).unwrap();
}

#[test]
fn evaluate_directories() {
    let gt = tempfile::tempdir().unwrap();
    let pred = tempfile::tempdir().unwrap();
    for (i, n) in ["f0.png", "f1.png"].iter().enumerate() {
        write_hdr(gt.path(), n, i as u64);
        write_hdr(pred.path(), n, 10 + i as u64);
    }
    let cfg = EvalConfig {
        permissive_ms_ssim: true,
        ..Default::default()
    };
    let same = evaluate_pairs(gt.path(), gt.path(), &cfg).unwrap();
    for p in ["f0", "f1"] {
        assert_eq!(same.values["psnr"][p], PSNR_IDENTICAL);
        assert_eq!(same.values["ssim"][p], 1.0);
        assert_eq!(same.values["ms_ssim"][p], 1.0);
    }
    assert!(same.notes.iter().any(|n| n.contains("MS-SSIM used")));
    let r = evaluate_pairs(pred.path(), gt.path(), &cfg).unwrap();
    assert!(r.summary("psnr").unwrap().mean.is_finite());
    assert!(r.summary("mpsnr").unwrap().std >= 0.0);
    assert!(evaluate_pairs(pred.path(), gt.path(), &EvalConfig::default()).is_err());
    let subset = EvalConfig {
        metrics: MetricSet::parse("psnr,ssim").unwrap(),
        ..Default::default()
    };
    let r = evaluate_pairs(pred.path(), gt.path(), &subset).unwrap();
    assert_eq!(r.values.keys().collect::<Vec<_>>(), ["psnr", "ssim"]);
    assert!(MetricSet::parse("psnr,bogus").is_err());

    write_hdr(pred.path(), "extra.png", 3);
    assert!(matches!(evaluate_pairs(pred.path(), gt.path(), &cfg), Err(Error::Dataset(_))));
}
