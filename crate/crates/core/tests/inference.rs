use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rns_analog::analog::{CoreConfig, NoiseModel};
use rns_analog::harness::experiments::{accuracy_sweep, AccuracySweepConfig, SweepMode};
use rns_analog::harness::toy::{digits_model, digits_test_set, evaluate};
use rns_analog::harness::{argmax, run_network, Activation, Backend, ConvGeometry, Layer, ModelSpec};
use rns_analog::rng::Stream;
use rns_analog::ModelSpec64;

fn direct_conv(x: &[f64], w: &[f64], g: &ConvGeometry, out_c: usize) -> Vec<f64> {
    let (oh, ow, k) = (g.out_height(), g.out_width(), g.kernel);
    let mut y = vec![0.0; out_c * oh * ow];
    for o in 0..out_c {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = 0.0;
                for c in 0..g.in_channels {
                    for ky in 0..k {
                        for kx in 0..k {
                            let iy = (oy * g.stride + ky) as i64 - g.padding as i64;
                            let ix = (ox * g.stride + kx) as i64 - g.padding as i64;
                            if iy < 0 || ix < 0 || iy >= g.height as i64 || ix >= g.width as i64 {
                                continue;
                            }
                            let xv = x[(c * g.height + iy as usize) * g.width + ix as usize];
                            acc += w[((o * g.in_channels + c) * k + ky) * k + kx] * xv;
                        }
                    }
                }
                y[(o * oh + oy) * ow + ox] = acc;
            }
        }
    }
    y
}

#[test]
fn conv_lowering_matches_direct_convolution() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for (stride, padding) in [(1, 0), (1, 1), (2, 1), (3, 2)] {
        let g = ConvGeometry { in_channels: 3, height: 9, width: 7, kernel: 3, stride, padding };
        let out_c = 4;
        let w: Vec<f64> = (0..out_c * g.patch_len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x: Vec<f64> = (0..3 * 9 * 7).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let model = ModelSpec::new(vec![Layer::conv(w.clone(), out_c, g, None, Activation::Identity).unwrap()]).unwrap();
        let got = run_network(&model, &x, &Backend::Float, Stream::root(0)).unwrap();
        let want = direct_conv(&x, &w, &g, out_c);
        assert_eq!(got.len(), want.len());
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
        let analog = Backend::Analog { cfg: CoreConfig::rns_preset(8, 16).unwrap(), noise: NoiseModel::noiseless() };
        let approx = run_network(&model, &x, &analog, Stream::root(0)).unwrap();
        for (a, b) in approx.iter().zip(&want) {
            assert!((a - b).abs() < 0.15, "{a} vs {b}");
        }
    }
}

#[test]
fn noiseless_rns_b8_matches_float_argmax() {
    let model: ModelSpec64 = digits_model();
    let data = digits_test_set::<f64>();
    let backend = Backend::Analog { cfg: CoreConfig::rns_preset(8, 128).unwrap(), noise: NoiseModel::noiseless() };
    let mut agree = 0;
    for i in 0..data.len() {
        let a = run_network(&model, data.sample(i), &Backend::Float, Stream::root(0)).unwrap();
        let b = run_network(&model, data.sample(i), &backend, Stream::root(0)).unwrap();
        agree += (argmax(&a) == argmax(&b)) as usize;
    }
    assert!(agree as f64 >= 0.99 * data.len() as f64, "{agree}/{}", data.len());
}

#[test]
fn rns_b6_keeps_float_accuracy() {
    let model = digits_model::<f64>();
    let data = digits_test_set::<f64>();
    let float = evaluate(&model, &data, &Backend::Float, Stream::root(0)).unwrap().accuracy();
    let backend = Backend::Analog { cfg: CoreConfig::rns_preset(6, 128).unwrap(), noise: NoiseModel::noiseless() };
    let rns = evaluate(&model, &data, &backend, Stream::root(0)).unwrap().accuracy();
    assert!(rns >= 0.99 * float, "{rns} vs {float}");
}

#[test]
fn f32_model_runs() {
    let model = digits_model::<f32>();
    let data = digits_test_set::<f32>();
    let sub = data.select(&data.subset_indices(100, 4));
    let backend = Backend::Analog { cfg: CoreConfig::rns_preset(8, 64).unwrap(), noise: NoiseModel::noiseless() };
    assert!(evaluate(&model, &sub, &backend, Stream::root(0)).unwrap().accuracy() > 0.9);
}

#[test]
fn wide_adc_fixed_point_matches_rns() {
    let model = digits_model::<f64>();
    let data = digits_test_set::<f64>();
    let sub = data.select(&data.subset_indices(100, 2));
    let rns = CoreConfig::rns_preset(8, 64).unwrap();
    let fixed = CoreConfig::fixed_point(64, 8, rns.b_out()).unwrap();
    for i in 0..sub.len() {
        let a = run_network(&model, sub.sample(i), &Backend::Analog { cfg: rns.clone(), noise: NoiseModel::noiseless() }, Stream::root(0));
        let b = run_network(&model, sub.sample(i), &Backend::Analog { cfg: fixed.clone(), noise: NoiseModel::noiseless() }, Stream::root(0));
        assert_eq!(a.unwrap(), b.unwrap());
    }
}

#[test]
fn accuracy_sweep_small_grid() {
    let model = digits_model::<f64>();
    let data = digits_test_set::<f64>();
    let cfg = AccuracySweepConfig { bits: vec![4], h: vec![16, 128], seeds: vec![5], samples: 200, ..Default::default() };
    let r = accuracy_sweep(&model, &data, &cfg).unwrap();
    assert_eq!(r.result.rows.len(), 4);
    let f16 = r.mean(4, 16, SweepMode::FixedPoint).unwrap();
    let f128 = r.mean(4, 128, SweepMode::FixedPoint).unwrap();
    assert!(f128 <= f16);
    assert!(r.mean(4, 128, SweepMode::Rns).unwrap() > f128);
    assert!(r.mean(8, 16, SweepMode::Rns).is_none());
}

#[test]
fn retries_do_not_hurt_accuracy() {
    use rns_analog::harness::experiments::{noise_sweep, NoiseSweepConfig};
    let model = digits_model::<f64>();
    let data = digits_test_set::<f64>();
    let cfg = NoiseSweepConfig {
        redundancy: vec![2],
        p: vec![0.01, 0.03, 0.1],
        attempts: vec![1, 2, 5],
        samples: 200,
        rate_trials: 5000,
        ..Default::default()
    };
    let r = noise_sweep(&model, &data, &cfg).unwrap();
    let acc: Vec<f64> = r.sweep.values("accuracy").iter().map(|v| v.parse().unwrap()).collect();
    let mean = |ri: usize| acc[ri * 3..ri * 3 + 3].iter().sum::<f64>() / 3.0;
    assert!(mean(1) >= mean(0) && mean(2) >= mean(0), "{acc:?}");
    // beyond two attempts the gain is within sampling noise: an output left
    // unresolved is zeroed, which hurts less than a late undetected error
    assert!((mean(2) - mean(1)).abs() < 0.02, "{acc:?}");
    assert_eq!(r.cutoffs.rows.len(), 3);
    assert_eq!(r.outputs_per_inference, 42);
}
