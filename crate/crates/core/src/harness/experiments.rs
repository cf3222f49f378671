//! Experiment drivers. Each returns an [`ExperimentResult`] whose config
//! snapshot and seed reproduce it bit for bit.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analog::{CoreConfig, NoiseModel};
use crate::energy::{energy_table, ConverterParams};
use crate::error::{Error, Result};
use crate::harness::gemm::{float_gemm, tiled_gemm};
use crate::harness::model::{Backend, ModelSpec};
use crate::harness::toy::{evaluate, Dataset};
use crate::rng::Stream;
use crate::rns::{preset_for_bits, ModuliSet};
use crate::rrns::{estimate_rates, p_err_limit, p_err_retry, retry_protocol_simulate, ErrorRates, ExactRates, RrnsCode};
use crate::scalar::Real;

pub const DEFAULT_SEED: u64 = 1;

/// Largest word/value enumeration attempted for exact RRNS rates.
pub const EXACT_ENUMERATION_BUDGET: u64 = 1 << 32;

/// CSV-ready table plus what produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub id: String,
    pub seed: u64,
    /// TOML rendering of the driver's config.
    pub config: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl ExperimentResult {
    pub fn new<C: Serialize>(id: &str, seed: u64, config: &C, header: &[&str]) -> Result<Self> {
        let config = toml::to_string(config).map_err(|e| Error::Manifest(e.to_string()))?;
        Ok(Self { id: id.into(), seed, config, header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() })
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Column `name` of every row.
    pub fn values(&self, name: &str) -> Vec<&str> {
        match self.column(name) {
            Some(c) => self.rows.iter().map(|r| r[c].as_str()).collect(),
            None => Vec::new(),
        }
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Io(e.to_string());
        wr.write_record(&self.header).map_err(io)?;
        for r in &self.rows {
            wr.write_record(r).map_err(io)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}

/// Shortest round-trip rendering; scientific notation outside `[1e-4, 1e15)`.
pub fn fmt<T: Real>(v: T) -> String {
    let a = v.abs();
    if a == T::zero() || !a.is_finite() || (a >= T::lit(1e-4) && a < T::lit(1e15)) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn random_pair(h: usize, stream: Stream) -> (Vec<f64>, Vec<f64>) {
    let mut rng = stream.rng();
    let w = (0..h).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    let x = (0..h).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    (w, x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DotProductConfig {
    pub bits: Vec<u32>,
    pub h: usize,
    pub trials: u64,
    pub seed: u64,
    pub bins: usize,
}

impl Default for DotProductConfig {
    fn default() -> Self {
        Self { bits: (4..=8).collect(), h: 128, trials: 10_000, seed: DEFAULT_SEED, bins: 41 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DotProductPoint {
    pub bits: u32,
    pub rns_mean: f64,
    pub rns_max: f64,
    pub fixed_mean: f64,
    pub fixed_max: f64,
    /// `fixed_mean / rns_mean`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DotProductReport {
    pub points: Vec<DotProductPoint>,
    pub summary: ExperimentResult,
    pub histogram: ExperimentResult,
}

/// Error of single `h`-element dot products on uniform `[-1, 1]` data against
/// the float result, for the noiseless RNS core and the fixed-point core with
/// a `b`-bit ADC. Trial `t` at width `b` draws from `Stream::root(seed).path(&[b, t])`.
pub fn dot_product_error_experiment(cfg: &DotProductConfig) -> Result<DotProductReport> {
    let mut summary = ExperimentResult::new(
        "dotprod-error",
        cfg.seed,
        cfg,
        &["b", "h", "trials", "rns_mean_abs_err", "rns_max_abs_err", "fxp_mean_abs_err", "fxp_max_abs_err", "ratio"],
    )?;
    let mut histogram = ExperimentResult::new("dotprod-error-histogram", cfg.seed, cfg, &["b", "mode", "bin_lo", "bin_hi", "count"])?;
    let mut points = Vec::new();
    if cfg.trials == 0 {
        return Ok(DotProductReport { points, summary, histogram });
    }
    let root = Stream::root(cfg.seed);
    for &b in &cfg.bits {
        let rns = CoreConfig::rns_preset(b, cfg.h)?;
        let fixed = CoreConfig::fixed_point(cfg.h, b, b)?;
        let errs: Vec<(f64, f64)> = (0..cfg.trials)
            .into_par_iter()
            .map(|t| {
                let s = root.path(&[b as u64, t]);
                let (w, x) = random_pair(cfg.h, s);
                let exact = float_gemm(&w, 1, cfg.h, &x)?[0];
                let run = |c: &CoreConfig| tiled_gemm(&w, 1, cfg.h, &x, c, &NoiseModel::noiseless(), s).map(|y| y[0] - exact);
                Ok((run(&rns)?, run(&fixed)?))
            })
            .collect::<Result<_>>()?;
        let stats = |f: fn(&(f64, f64)) -> f64| {
            let (sum, max) = errs.iter().map(f).fold((0.0, 0.0f64), |(s, m), e| (s + e.abs(), m.max(e.abs())));
            (sum / errs.len() as f64, max)
        };
        let (rns_mean, rns_max) = stats(|e| e.0);
        let (fixed_mean, fixed_max) = stats(|e| e.1);
        let p = DotProductPoint { bits: b, rns_mean, rns_max, fixed_mean, fixed_max, ratio: fixed_mean / rns_mean };
        summary.push(vec![
            b.to_string(),
            cfg.h.to_string(),
            cfg.trials.to_string(),
            fmt(rns_mean),
            fmt(rns_max),
            fmt(fixed_mean),
            fmt(fixed_max),
            fmt(p.ratio),
        ]);
        points.push(p);

        let bins = cfg.bins.max(1);
        let span = if fixed_max.max(rns_max) > 0.0 { fixed_max.max(rns_max) } else { 1.0 };
        let width = 2.0 * span / bins as f64;
        for (mode, pick) in [("rns", 0), ("fixed_point", 1)] {
            let mut counts = vec![0u64; bins];
            for e in &errs {
                let v = if pick == 0 { e.0 } else { e.1 };
                counts[(((v + span) / width) as usize).min(bins - 1)] += 1;
            }
            for (i, c) in counts.into_iter().enumerate() {
                let lo = -span + i as f64 * width;
                histogram.push(vec![b.to_string(), mode.into(), fmt(lo), fmt(lo + width), c.to_string()]);
            }
        }
    }
    Ok(DotProductReport { points, summary, histogram })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    Rns,
    FixedPoint,
}

impl SweepMode {
    pub fn name(self) -> &'static str {
        match self {
            SweepMode::Rns => "rns",
            SweepMode::FixedPoint => "fixed_point",
        }
    }

    /// Noiseless core for `b`-bit operands; fixed-point ADCs keep `b` bits.
    pub fn core(self, bits: u32, h: usize) -> Result<CoreConfig> {
        match self {
            SweepMode::Rns => CoreConfig::rns_preset(bits, h),
            SweepMode::FixedPoint => CoreConfig::fixed_point(h, bits, bits),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AccuracySweepConfig {
    pub bits: Vec<u32>,
    pub h: Vec<usize>,
    pub modes: Vec<SweepMode>,
    /// Each seed evaluates its own random subset of the test set.
    pub seeds: Vec<u64>,
    pub samples: usize,
}

impl Default for AccuracySweepConfig {
    fn default() -> Self {
        Self {
            bits: vec![4, 5, 6, 7, 8],
            h: vec![16, 64, 128],
            modes: vec![SweepMode::Rns, SweepMode::FixedPoint],
            seeds: vec![1, 2, 3],
            samples: 400,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccuracyPoint {
    pub bits: u32,
    pub h: usize,
    pub mode: SweepMode,
    pub seed: u64,
    pub accuracy: f64,
    pub float_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyReport {
    pub points: Vec<AccuracyPoint>,
    pub result: ExperimentResult,
}

impl AccuracyReport {
    /// Mean accuracy over seeds, `None` when the point was not swept.
    pub fn mean(&self, bits: u32, h: usize, mode: SweepMode) -> Option<f64> {
        let v: Vec<f64> = self
            .points
            .iter()
            .filter(|p| p.bits == bits && p.h == h && p.mode == mode)
            .map(|p| p.accuracy)
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    pub fn mean_float(&self) -> f64 {
        let mut seen = Vec::new();
        for p in &self.points {
            if !seen.iter().any(|&(s, _)| s == p.seed) {
                seen.push((p.seed, p.float_accuracy));
            }
        }
        seen.iter().map(|s| s.1).sum::<f64>() / seen.len().max(1) as f64
    }
}

/// Noiseless top-1 accuracy over a `(b, h, mode)` grid.
pub fn accuracy_sweep<T: Real>(model: &ModelSpec<T>, data: &Dataset<T>, cfg: &AccuracySweepConfig) -> Result<AccuracyReport> {
    let mut result = ExperimentResult::new(
        "accuracy",
        cfg.seeds.first().copied().unwrap_or(DEFAULT_SEED),
        cfg,
        &["b", "h", "mode", "seed", "samples", "accuracy", "float_accuracy"],
    )?;
    let mut points = Vec::new();
    for &seed in &cfg.seeds {
        let subset = data.select(&data.subset_indices(cfg.samples, seed));
        let stream = Stream::root(seed);
        let float_accuracy = evaluate(model, &subset, &Backend::Float, stream)?.accuracy();
        for &b in &cfg.bits {
            for &h in &cfg.h {
                for &mode in &cfg.modes {
                    let backend = Backend::Analog { cfg: mode.core(b, h)?, noise: NoiseModel::noiseless() };
                    let accuracy = evaluate(model, &subset, &backend, stream)?.accuracy();
                    result.push(vec![
                        b.to_string(),
                        h.to_string(),
                        mode.name().into(),
                        seed.to_string(),
                        subset.len().to_string(),
                        fmt(accuracy),
                        fmt(float_accuracy),
                    ]);
                    points.push(AccuracyPoint { bits: b, h, mode, seed, accuracy, float_accuracy });
                }
            }
        }
    }
    Ok(AccuracyReport { points, result })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSweepConfig {
    pub bits: u32,
    pub h: usize,
    /// Non-redundant moduli; empty selects the preset for `bits`.
    pub moduli: Vec<u64>,
    /// Redundant moduli, used as prefixes of the lengths in `redundancy`.
    pub redundant: Vec<u64>,
    pub redundancy: Vec<usize>,
    pub p: Vec<f64>,
    pub attempts: Vec<u32>,
    pub seed: u64,
    pub samples: usize,
    /// Monte Carlo trials behind each analytic p_err value.
    pub rate_trials: u64,
}

impl Default for NoiseSweepConfig {
    fn default() -> Self {
        Self {
            bits: 6,
            h: 128,
            moduli: Vec::new(),
            redundant: vec![67, 71],
            redundancy: vec![0, 1, 2],
            p: vec![0.0, 1e-4, 3e-4, 1e-3, 3e-3, 1e-2, 3e-2, 1e-1],
            attempts: vec![1, 2, 5],
            seed: DEFAULT_SEED,
            samples: 400,
            rate_trials: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSweepReport {
    pub sweep: ExperimentResult,
    pub cutoffs: ExperimentResult,
    pub float_accuracy: f64,
    /// MVM output elements produced per inference.
    pub outputs_per_inference: usize,
}

/// Accuracy against residue error rate for each redundancy level and retry
/// budget, with the analytic `p_err(R)` alongside. The cutoff table lists
/// the first swept `p` whose accuracy falls below 0.99 of the float baseline.
pub fn noise_sweep<T: Real>(model: &ModelSpec<T>, data: &Dataset<T>, cfg: &NoiseSweepConfig) -> Result<NoiseSweepReport> {
    let base: Vec<u64> = if cfg.moduli.is_empty() {
        preset_for_bits(cfg.bits)
            .ok_or_else(|| Error::ConfigMismatch(format!("no moduli preset for {} bits", cfg.bits)))?
            .moduli()
            .iter()
            .map(|&m| m as u64)
            .collect()
    } else {
        ModuliSet::new(&cfg.moduli)?.moduli().iter().map(|&m| m as u64).collect()
    };
    let subset = data.select(&data.subset_indices(cfg.samples, cfg.seed));
    let root = Stream::root(cfg.seed);
    let float_eval = evaluate(model, &subset, &Backend::Float, root)?;
    let float_accuracy = float_eval.accuracy();
    let mut sweep = ExperimentResult::new(
        "noise-sweep",
        cfg.seed,
        cfg,
        &["n_minus_k", "n", "k", "R", "p", "accuracy", "float_accuracy", "p_err_analytic", "retries", "unresolved"],
    )?;
    let mut cutoffs =
        ExperimentResult::new("noise-sweep-cutoff", cfg.seed, cfg, &["n_minus_k", "R", "p_cutoff", "p_err_cutoff", "outputs_per_inference"])?;
    let mut outputs_per_inference = 0;
    for &extra in &cfg.redundancy {
        if extra > cfg.redundant.len() {
            return Err(Error::ConfigMismatch(format!("redundancy {extra} exceeds the {} redundant moduli", cfg.redundant.len())));
        }
        let code = RrnsCode::with_split(&base, &cfg.redundant[..extra])?;
        let rates: Vec<ErrorRates> = cfg
            .p
            .iter()
            .enumerate()
            .map(|(pi, &p)| Ok(estimate_rates(&code, &NoiseModel::new(p, root.path(&[extra as u64, pi as u64]).id())?, cfg.rate_trials)))
            .collect::<Result<_>>()?;
        for &r in &cfg.attempts {
            let core = CoreConfig::rrns(cfg.h, cfg.bits, code.clone(), r)?;
            let mut cutoff = None;
            for (pi, &p) in cfg.p.iter().enumerate() {
                let noise = NoiseModel::new(p, cfg.seed)?;
                // shared across R: a larger budget replays the same first attempts
                let stream = root.path(&[extra as u64, pi as u64]);
                let ev = evaluate(model, &subset, &Backend::Analog { cfg: core.clone(), noise }, stream)?;
                outputs_per_inference = ev.stats.tile_outputs / subset.len().max(1);
                let p_err = p_err_retry(&rates[pi], r);
                if cutoff.is_none() && ev.accuracy() < 0.99 * float_accuracy {
                    cutoff = Some((p, p_err));
                }
                sweep.push(vec![
                    extra.to_string(),
                    code.n().to_string(),
                    code.k().to_string(),
                    r.to_string(),
                    fmt(p),
                    fmt(ev.accuracy()),
                    fmt(float_accuracy),
                    fmt(p_err),
                    ev.stats.retries.to_string(),
                    ev.stats.unresolved.to_string(),
                ]);
            }
            let (pc, ec) = cutoff.map_or((String::new(), String::new()), |(p, e)| (fmt(p), fmt(e)));
            cutoffs.push(vec![extra.to_string(), r.to_string(), pc, ec, outputs_per_inference.to_string()]);
        }
    }
    Ok(NoiseSweepReport { sweep, cutoffs, float_accuracy, outputs_per_inference })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerrConfig {
    pub moduli: Vec<u64>,
    pub k: usize,
    pub p: Vec<f64>,
    pub attempts: Vec<u32>,
    pub trials: u64,
    pub seed: u64,
    /// Enumerate single-attempt rates exactly when small enough; otherwise
    /// estimate them with `trials` Monte Carlo samples.
    pub exact: bool,
}

impl Default for PerrConfig {
    fn default() -> Self {
        Self {
            moduli: vec![15, 14, 13, 11],
            k: 2,
            p: vec![0.01, 0.05, 0.1],
            attempts: vec![1, 2, 3, 5, 10],
            trials: 100_000,
            seed: DEFAULT_SEED,
            exact: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerrPoint {
    pub p: f64,
    pub attempts: u32,
    pub rates: ErrorRates,
    pub analytic: f64,
    pub empirical: f64,
    pub limit: f64,
    pub trials: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerrReport {
    pub points: Vec<PerrPoint>,
    pub result: ExperimentResult,
}

/// Analytic `p_err(R)` from single-attempt case rates next to a simulation
/// of the retry protocol. Point `p[i]` uses noise seed
/// `Stream::root(seed).child(i).id()` for every `R`.
pub fn perr_sweep(cfg: &PerrConfig) -> Result<PerrReport> {
    let code = RrnsCode::new(&cfg.moduli, cfg.k)?;
    let exact = if cfg.exact { ExactRates::enumerate(&code, EXACT_ENUMERATION_BUDGET).ok() } else { None };
    let mut result = ExperimentResult::new(
        "rrns-perr",
        cfg.seed,
        cfg,
        &["bit_width", "n", "k", "p", "R", "p_c", "p_d", "p_u", "p_err_analytic", "p_err_empirical", "p_err_limit", "trials", "seed"],
    )?;
    let mut points = Vec::new();
    for (pi, &p) in cfg.p.iter().enumerate() {
        let noise = NoiseModel::new(p, Stream::root(cfg.seed).child(pi as u64).id())?;
        let rates = match &exact {
            Some(e) => e.rates(p),
            None => estimate_rates(&code, &noise, cfg.trials),
        };
        for &r in &cfg.attempts {
            let sim = retry_protocol_simulate(&code, &noise, r, cfg.trials);
            let pt = PerrPoint {
                p,
                attempts: r,
                rates,
                analytic: p_err_retry(&rates, r),
                empirical: sim.p_err,
                limit: p_err_limit(&rates),
                trials: cfg.trials,
            };
            result.push(vec![
                code.moduli().bit_width().to_string(),
                code.n().to_string(),
                code.k().to_string(),
                fmt(p),
                r.to_string(),
                fmt(rates.p_c),
                fmt(rates.p_d),
                fmt(rates.p_u),
                fmt(pt.analytic),
                fmt(pt.empirical),
                fmt(pt.limit),
                cfg.trials.to_string(),
                cfg.seed.to_string(),
            ]);
            points.push(pt);
        }
    }
    Ok(PerrReport { points, result })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnergyConfig {
    pub bits: Vec<u32>,
    pub h: usize,
    pub params: ConverterParams<f64>,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        Self { bits: (4..=8).collect(), h: 128, params: ConverterParams::default() }
    }
}

/// Per-element converter energy of both cores. `ratio` is the fixed-point
/// to RNS ADC energy ratio at that `b`, repeated on both rows.
pub fn energy_experiment(cfg: &EnergyConfig) -> Result<ExperimentResult> {
    cfg.params.validate()?;
    let mut result = ExperimentResult::new("energy", 0, cfg, &["b", "mode", "n", "b_adc_effective", "dac_J", "adc_J", "ratio"])?;
    for row in energy_table(&cfg.bits, cfg.h, &cfg.params)? {
        result.push(vec![
            row.bits.to_string(),
            row.mode.into(),
            row.converters.to_string(),
            row.adc_enob.to_string(),
            fmt(row.dac),
            fmt(row.adc),
            fmt(row.ratio),
        ]);
    }
    Ok(result)
}
