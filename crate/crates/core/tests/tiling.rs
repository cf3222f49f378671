use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rns_analog::analog::{residue_mvm, CoreConfig, NoiseModel};
use rns_analog::harness::{float_gemm, tiled_gemm, tiled_gemm_with_stats, GemmStats};
use rns_analog::rng::Stream;
use rns_analog::rns::{ModuliSet, PRESETS};
use std::sync::Arc;

const Q: i64 = 127;

/// Integer matrix whose every 32-wide row segment contains +-Q, so each
/// per-tile scale is exactly Q and quantization at b = 8 is lossless.
fn grid_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut w: Vec<f64> = (0..rows * cols).map(|_| rng.gen_range(-Q..=Q) as f64).collect();
    for r in 0..rows {
        for c0 in (0..cols).step_by(32) {
            w[r * cols + c0] = if rng.gen() { Q as f64 } else { -Q as f64 };
        }
    }
    w
}

#[test]
fn tiling_invariance_on_exact_grids() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (rows, cols) = (150, 300);
    let w = grid_matrix(rows, cols, &mut rng);
    let x = grid_matrix(1, cols, &mut rng);
    let exact: Vec<f64> = (0..rows)
        .map(|r| (0..cols).map(|c| (w[r * cols + c] as i64 * x[c] as i64) as f64).sum())
        .collect();
    for h in [32, 64, 128] {
        let cfg = CoreConfig::rns_preset(8, h).unwrap();
        let y = tiled_gemm(&w, rows, cols, &x, &cfg, &NoiseModel::noiseless(), Stream::root(0)).unwrap();
        assert_eq!(y, exact, "h = {h}");
    }
}

#[test]
fn stats_count_tiles() {
    let w = vec![0.5f64; 150 * 300];
    let x = vec![0.25f64; 300];
    let cfg = CoreConfig::rns_preset(6, 64).unwrap();
    let mut stats = GemmStats::default();
    tiled_gemm_with_stats(&w, 150, 300, &x, &cfg, &NoiseModel::noiseless(), Stream::root(0), &mut stats).unwrap();
    // ceil(150/64) * ceil(300/64) tiles
    assert_eq!(stats.tiles, 3 * 5);
    assert_eq!(stats.tile_outputs, 150 * 5);
}

#[test]
fn dimension_mismatch() {
    let cfg = CoreConfig::rns_preset(6, 64).unwrap();
    assert!(tiled_gemm(&[1.0f64; 6], 2, 3, &[1.0; 2], &cfg, &NoiseModel::noiseless(), Stream::root(0)).is_err());
    assert!(tiled_gemm(&[1.0f64; 5], 2, 3, &[1.0; 3], &cfg, &NoiseModel::noiseless(), Stream::root(0)).is_err());
    assert!(float_gemm(&[1.0f64; 5], 2, 3, &[1.0; 3]).is_err());
}

#[test]
fn noiseless_residue_mvm_matches_wide_integers() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for (name, moduli) in PRESETS {
        let ms = Arc::new(ModuliSet::new(moduli).unwrap());
        let bits: u32 = name[3..].parse().unwrap();
        let q = (1i64 << (bits - 1)) - 1;
        let (rows, cols) = (16, 128);
        let w: Vec<i64> = (0..rows * cols).map(|_| rng.gen_range(-q..=q)).collect();
        let x: Vec<i64> = (0..cols).map(|_| rng.gen_range(-q..=q)).collect();
        let out = residue_mvm(&w, rows, cols, &x, &ms, &NoiseModel::noiseless(), Stream::root(0)).unwrap();
        let got = out.decode_signed();
        for r in 0..rows {
            let want: i128 = (0..cols).map(|c| w[r * cols + c] as i128 * x[c] as i128).sum();
            assert_eq!(got[r] as i128, want, "{name} row {r}");
        }
    }
}
