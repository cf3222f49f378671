use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rns_analog::analog::{CoreConfig, NoiseModel};
use rns_analog::harness::experiments::{dot_product_error_experiment, DotProductConfig};
use rns_analog::harness::tiled_gemm;
use rns_analog::rng::Stream;

/// Test-side quantized dot product: max-abs scale, round half away from zero.
fn oracle(w: &[f64], x: &[f64], bits: u32) -> f64 {
    let q = ((1i64 << (bits - 1)) - 1) as f64;
    let s = |v: &[f64]| v.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    let (sw, sx) = (s(w), s(x));
    let acc: f64 = w.iter().zip(x).map(|(a, b)| (a / sw * q).round() * (b / sx * q).round()).sum();
    acc * sw * sx / (q * q)
}

#[test]
fn noiseless_rns_error_is_pure_quantization() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let h = 128;
    for bits in 4..=8 {
        let cfg = CoreConfig::rns_preset(bits, h).unwrap();
        for _ in 0..200 {
            let w: Vec<f64> = (0..h).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            let x: Vec<f64> = (0..h).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            let y = tiled_gemm(&w, 1, h, &x, &cfg, &NoiseModel::noiseless(), Stream::root(0)).unwrap()[0];
            let want = oracle(&w, &x, bits);
            assert!((y - want).abs() <= 1e-12 * want.abs().max(1.0), "b = {bits}: {y} vs {want}");
        }
    }
}

#[test]
fn rns_max_error_within_quantization_bound() {
    let cfg = DotProductConfig { trials: 2000, ..Default::default() };
    let r = dot_product_error_experiment(&cfg).unwrap();
    for p in &r.points {
        // each of h products is off by at most s_w s_x / q with |w|, |x| <= 1
        let q = ((1i64 << (p.bits - 1)) - 1) as f64;
        assert!(p.rns_max <= cfg.h as f64 / q, "b = {}: {}", p.bits, p.rns_max);
        assert!(p.fixed_mean >= 5.0 * p.rns_mean, "b = {}: ratio {}", p.bits, p.ratio);
    }
}

#[test]
fn experiment_is_reproducible() {
    let cfg = DotProductConfig { bits: vec![5], trials: 500, seed: 77, ..Default::default() };
    let a = dot_product_error_experiment(&cfg).unwrap();
    let b = dot_product_error_experiment(&cfg).unwrap();
    assert_eq!(a.summary.to_csv(), b.summary.to_csv());
    assert_eq!(a.histogram.to_csv(), b.histogram.to_csv());
    let c = dot_product_error_experiment(&DotProductConfig { seed: 78, ..cfg }).unwrap();
    assert_ne!(a.summary.to_csv(), c.summary.to_csv());
}
