use crate::analog::{fixed_point_tile_mvm, rns_tile_mvm, CoreConfig, CoreMode, NoiseModel};
use crate::error::{Error, Result};
use crate::quant::{dequantize_output, quantize_input, quantize_weights};
use crate::rng::Stream;
use crate::scalar::Real;

/// Counters accumulated over the tiles of one or more GEMMs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GemmStats {
    pub tiles: usize,
    /// Output elements produced by MVM units (one per row per tile).
    pub tile_outputs: usize,
    /// Re-executions triggered by detected-but-uncorrectable codewords.
    pub retries: usize,
    /// Outputs still undecided after the last attempt; these are zeroed.
    pub unresolved: usize,
}

impl GemmStats {
    pub fn merge(&mut self, o: &GemmStats) {
        self.tiles += o.tiles;
        self.tile_outputs += o.tile_outputs;
        self.retries += o.retries;
        self.unresolved += o.unresolved;
    }
}

/// Exact floating-point MVM, the reference path.
pub fn float_gemm<T: Real>(w: &[T], rows: usize, cols: usize, x: &[T]) -> Result<Vec<T>> {
    check_dims(w, rows, cols, x)?;
    Ok((0..rows)
        .map(|r| w[r * cols..(r + 1) * cols].iter().zip(x).fold(T::zero(), |acc, (&a, &b)| acc + a * b))
        .collect())
}

fn check_dims<T>(w: &[T], rows: usize, cols: usize, x: &[T]) -> Result<()> {
    if w.len() != rows * cols {
        return Err(Error::DimensionMismatch { expected: rows * cols, actual: w.len() });
    }
    if x.len() != cols {
        return Err(Error::DimensionMismatch { expected: cols, actual: x.len() });
    }
    Ok(())
}

/// MVM of a row-major `rows x cols` matrix on the configured core.
///
/// The matrix is cut into `h x h` tiles (tails are short tiles, equivalent to
/// zero padding). Each tile is scaled and quantized on its own, run through
/// the core, decoded, dequantized, and accumulated in floating point across
/// the column tiles. Tile `(i, j)` draws noise from `stream.path(&[i, j])`.
pub fn tiled_gemm<T: Real>(
    w: &[T],
    rows: usize,
    cols: usize,
    x: &[T],
    cfg: &CoreConfig,
    noise: &NoiseModel,
    stream: Stream,
) -> Result<Vec<T>> {
    let mut stats = GemmStats::default();
    tiled_gemm_with_stats(w, rows, cols, x, cfg, noise, stream, &mut stats)
}

#[allow(clippy::too_many_arguments)]
pub fn tiled_gemm_with_stats<T: Real>(
    w: &[T],
    rows: usize,
    cols: usize,
    x: &[T],
    cfg: &CoreConfig,
    noise: &NoiseModel,
    stream: Stream,
    stats: &mut GemmStats,
) -> Result<Vec<T>> {
    check_dims(w, rows, cols, x)?;
    cfg.validate()?;
    noise.validate()?;
    let h = cfg.h;
    let mut out = vec![T::zero(); rows];
    let mut tile = Vec::with_capacity(h * h);
    for (ti, r0) in (0..rows).step_by(h).enumerate() {
        let r1 = (r0 + h).min(rows);
        for (tj, c0) in (0..cols).step_by(h).enumerate() {
            let c1 = (c0 + h).min(cols);
            tile.clear();
            for r in r0..r1 {
                tile.extend_from_slice(&w[r * cols + c0..r * cols + c1]);
            }
            let xq = quantize_input(&x[c0..c1], cfg.b_in)?;
            let wq = quantize_weights(&tile, r1 - r0, c1 - c0, cfg.b_w)?;
            let tile_stream = stream.path(&[ti as u64, tj as u64]);
            let y_si = match &cfg.mode {
                CoreMode::Rns { .. } => rns_tile_mvm(&wq, &xq, cfg, noise, tile_stream.child(0))?.decode_signed(),
                CoreMode::Rrns { code, attempts } => {
                    let mut decoded: Vec<Option<i64>> = vec![None; wq.rows];
                    for attempt in 0..*attempts {
                        if attempt > 0 {
                            stats.retries += decoded.iter().filter(|d| d.is_none()).count();
                        }
                        let raw = rns_tile_mvm(&wq, &xq, cfg, noise, tile_stream.child(attempt as u64))?;
                        for (r, slot) in decoded.iter_mut().enumerate().filter(|(_, d)| d.is_none()) {
                            let mut residues = raw.element(r);
                            code.apply_signed_offset(&mut residues);
                            *slot = code.signed_value(code.vote_decode(&residues)?.decision);
                        }
                        if decoded.iter().all(Option::is_some) {
                            break;
                        }
                    }
                    stats.unresolved += decoded.iter().filter(|d| d.is_none()).count();
                    decoded.into_iter().map(|d| d.unwrap_or(0)).collect()
                }
                CoreMode::FixedPoint => fixed_point_tile_mvm(&wq, &xq, cfg)?.rescaled(),
            };
            let part = dequantize_output(&y_si, xq.scale, &wq.row_scales, cfg.b_in, cfg.b_w)?;
            for (o, p) in out[r0..r1].iter_mut().zip(part) {
                *o += p;
            }
            stats.tiles += 1;
            stats.tile_outputs += r1 - r0;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quant::max_level;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect()
    }

    #[test]
    fn scalar_product() {
        let cfg = CoreConfig::rns_preset(8, 128).unwrap();
        for (w, x) in [(0.37f64, -2.5f64), (1.0, 1.0), (-0.001, 1000.0)] {
            let y = tiled_gemm(&[w], 1, 1, &[x], &cfg, &NoiseModel::noiseless(), Stream::root(0)).unwrap();
            let step = (w * x).abs() / max_level(8) as f64;
            assert!((y[0] - w * x).abs() <= 2.0 * step + 1e-12, "{w} * {x} -> {}", y[0]);
        }
    }

    #[test]
    fn identity_propagates() {
        let n = 256;
        let mut w = vec![0.0f64; n * n];
        (0..n).for_each(|i| w[i * n + i] = 1.0);
        let x = random(n, 4);
        let cfg = CoreConfig::rns_preset(8, 128).unwrap();
        let y = tiled_gemm(&w, n, n, &x, &cfg, &NoiseModel::noiseless(), Stream::root(0)).unwrap();
        let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, b) in y.iter().zip(&x) {
            // error of one quantized input level relative to the tile scale
            assert!((a - b).abs() <= 2.0 / 127.0 * scale, "{a} vs {b}");
        }
    }

    #[test]
    fn fixed_point_is_worse_than_rns() {
        let rns = CoreConfig::rns_preset(4, 128).unwrap();
        let fx = CoreConfig::fixed_point(128, 4, 4).unwrap();
        let (mut worse, mut e_rns, mut e_fx) = (0, 0.0, 0.0);
        for t in 0..100 {
            let w = random(40 * 300, 2 * t);
            let x = random(300, 2 * t + 1);
            let exact = float_gemm(&w, 40, 300, &x).unwrap();
            let err = |cfg: &CoreConfig| -> f64 {
                let y = tiled_gemm(&w, 40, 300, &x, cfg, &NoiseModel::noiseless(), Stream::root(t)).unwrap();
                y.iter().zip(&exact).map(|(a, b)| (a - b).abs()).sum()
            };
            let (a, b) = (err(&rns), err(&fx));
            e_rns += a;
            e_fx += b;
            worse += (b >= a) as usize;
        }
        assert_eq!(worse, 100);
        assert!(e_fx > 5.0 * e_rns);
    }

    #[test]
    fn lossless_fixed_point_equals_rns() {
        let w = random(20 * 50, 8);
        let x = random(50, 9);
        let rns = CoreConfig::rns_preset(6, 32).unwrap();
        let fx = CoreConfig::fixed_point(32, 6, rns.b_out()).unwrap();
        assert_eq!(fx.lost_bits(), 0);
        let a = tiled_gemm(&w, 20, 50, &x, &rns, &NoiseModel::noiseless(), Stream::root(0)).unwrap();
        let b = tiled_gemm(&w, 20, 50, &x, &fx, &NoiseModel::noiseless(), Stream::root(0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_padding_is_neutral() {
        let (rows, cols) = (5, 37);
        let w = random(rows * cols, 1);
        let x = random(cols, 2);
        let cfg = CoreConfig::rns_preset(6, 64).unwrap();
        let a = tiled_gemm(&w, rows, cols, &x, &cfg, &NoiseModel::noiseless(), Stream::root(0)).unwrap();
        // explicit padding to a full 64 x 64 tile
        let mut wp = vec![0.0; 64 * 64];
        for r in 0..rows {
            wp[r * 64..r * 64 + cols].copy_from_slice(&w[r * cols..(r + 1) * cols]);
        }
        let mut xp = x.clone();
        xp.resize(64, 0.0);
        let b = tiled_gemm(&wp, 64, 64, &xp, &cfg, &NoiseModel::noiseless(), Stream::root(0)).unwrap();
        assert_eq!(&b[..rows], &a[..]);
        assert!(b[rows..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn generic_over_f32() {
        let w: Vec<f32> = random(16 * 16, 3).into_iter().map(|v| v as f32).collect();
        let x: Vec<f32> = random(16, 5).into_iter().map(|v| v as f32).collect();
        let cfg = CoreConfig::rns_preset(8, 16).unwrap();
        let y = tiled_gemm(&w, 16, 16, &x, &cfg, &NoiseModel::noiseless(), Stream::root(0)).unwrap();
        let exact = float_gemm(&w, 16, 16, &x).unwrap();
        for (a, b) in y.iter().zip(&exact) {
            assert!((a - b).abs() < 0.1);
        }
        assert!(tiled_gemm(&w, 16, 15, &x, &cfg, &NoiseModel::noiseless(), Stream::root(0)).is_err());
    }

    #[test]
    fn rrns_core_recovers_from_noise() {
        use crate::rrns::RrnsCode;
        let code = RrnsCode::with_split(&[63, 62, 61, 59], &[67, 71]).unwrap();
        let w = random(64 * 64, 11);
        let x = random(64, 12);
        let clean = CoreConfig::rns_preset(6, 64).unwrap();
        let reference = tiled_gemm(&w, 64, 64, &x, &clean, &NoiseModel::noiseless(), Stream::root(0)).unwrap();
        let noise = NoiseModel::new(0.02, 3).unwrap();
        let cfg = CoreConfig::rrns(64, 6, code, 4).unwrap();
        let mut stats = GemmStats::default();
        let y = tiled_gemm_with_stats(&w, 64, 64, &x, &cfg, &noise, Stream::root(3), &mut stats).unwrap();
        assert_eq!(stats.tile_outputs, 64);
        let wrong = y.iter().zip(&reference).filter(|(a, b)| a != b).count();
        assert!(wrong <= 1, "{wrong} outputs wrong");
        // plain RNS under the same noise rate breaks several outputs
        let noisy = tiled_gemm(&w, 64, 64, &x, &clean, &noise, Stream::root(3)).unwrap();
        assert!(noisy.iter().zip(&reference).filter(|(a, b)| a != b).count() > 3);
    }
}
