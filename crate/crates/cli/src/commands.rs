use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use rns_analog::analog::{CoreConfig, NoiseModel};
use rns_analog::harness::experiments::{
    accuracy_sweep, dot_product_error_experiment, energy_experiment, fmt, noise_sweep, perr_sweep, AccuracySweepConfig,
    DotProductConfig, EnergyConfig, ExperimentResult, NoiseSweepConfig, PerrConfig, DEFAULT_SEED,
};
use rns_analog::harness::toy::{digits_model, digits_test_set, Dataset};
use rns_analog::harness::{argmax, Backend, ModelSpec, TensorFile};
use rns_analog::rng::Stream;
use rns_analog::rns::{preset, preset_for_bits, ModuliSet};
use rns_analog::rrns::RrnsCode;

use crate::config::{ConfigFile, Layered};
use crate::{Cli, Command, Failure};

/// Summary lines go to stdout, or stderr when the CSV itself does.
struct Report {
    csv_on_stdout: bool,
}

impl Report {
    fn line(&self, s: impl AsRef<str>) {
        if self.csv_on_stdout {
            eprintln!("{}", s.as_ref());
        } else {
            println!("{}", s.as_ref());
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

fn write_csv(result: &ExperimentResult, path: &Path) -> Result<(), Failure> {
    if path == Path::new("-") {
        let stdout = io::stdout();
        let mut lock = stdout.lock();
        result.write_csv(&mut lock)?;
        lock.flush().map_err(|e| io_err(path, e))?;
        return Ok(());
    }
    let f = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(f);
    result.write_csv(&mut w).map_err(|e| io_err(path, e))?;
    w.flush().map_err(|e| io_err(path, e))
}

fn emit(cli: &Cli, default_name: &str, result: &ExperimentResult, report: &Report) -> Result<(), Failure> {
    let path = cli.out.clone().unwrap_or_else(|| PathBuf::from(format!("{default_name}.csv")));
    write_csv(result, &path)?;
    if path != Path::new("-") {
        report.line(format!("wrote {} rows to {}", result.rows.len(), path.display()));
    }
    if let Some(snap) = &cli.snapshot {
        std::fs::write(snap, &result.config).map_err(|e| io_err(snap, e))?;
    }
    Ok(())
}

fn ints<T: Copy + Into<u64>>(v: Option<&Vec<T>>) -> Option<Vec<i64>> {
    v.map(|v| v.iter().map(|&x| x.into() as i64).collect())
}

fn int(v: Option<impl Into<u64>>) -> Option<i64> {
    v.map(|x| x.into() as i64)
}

fn preset_moduli(name: &str) -> Result<Vec<u64>, Failure> {
    let ms = preset(name).ok_or_else(|| Failure::Config(format!("unknown preset `{name}` (expected rns4 .. rns8)")))?;
    Ok(ms.moduli().iter().map(|&m| m as u64).collect())
}

pub fn dispatch(cli: &Cli, file: &ConfigFile) -> Result<(), Failure> {
    let report = Report { csv_on_stdout: cli.out.as_deref() == Some(Path::new("-")) };
    match &cli.command {
        Command::Convert(a) => convert(a.value, a.moduli.as_deref(), a.preset.as_deref()),
        Command::DotprodError(a) => {
            let mut l = file.section("dotprod_error", &cli.overrides)?;
            l.set_list("bits", ints(a.bits.as_ref()).as_ref());
            l.set("h", int(a.h.map(|v| v as u64)));
            l.set("trials", int(a.trials));
            l.set("seed", int(a.seed));
            l.set("bins", int(a.bins.map(|v| v as u64)));
            let cfg: DotProductConfig = l.build("dotprod_error")?;
            let r = dot_product_error_experiment(&cfg)?;
            report.line(format!("dot-product error, h = {}, {} trials, seed {}", cfg.h, cfg.trials, cfg.seed));
            report.line(format!("{:>3} {:>14} {:>14} {:>14} {:>14} {:>8}", "b", "rns_mean", "rns_max", "fxp_mean", "fxp_max", "ratio"));
            for p in &r.points {
                report.line(format!(
                    "{:>3} {:>14.6e} {:>14.6e} {:>14.6e} {:>14.6e} {:>8.2}",
                    p.bits, p.rns_mean, p.rns_max, p.fixed_mean, p.fixed_max, p.ratio
                ));
            }
            if let Some(h) = &a.histogram {
                write_csv(&r.histogram, h)?;
            }
            emit(cli, "dotprod-error", &r.summary, &report)
        }
        Command::Accuracy(a) => {
            let mut l = file.section("accuracy", &cli.overrides)?;
            l.set_list("bits", ints(a.bits.as_ref()).as_ref());
            l.set_list("h", ints(a.h.as_ref()).as_ref());
            l.set_list("modes", a.modes.as_ref());
            l.set_list("seeds", ints(a.seeds.as_ref()).as_ref());
            l.set("samples", int(a.samples));
            let cfg: AccuracySweepConfig = l.build("accuracy")?;
            let (model, data) = (digits_model::<f64>(), digits_test_set::<f64>());
            let r = accuracy_sweep(&model, &data, &cfg)?;
            report.line(format!("toy-model accuracy, mean over seeds {:?}; float {:.4}", cfg.seeds, r.mean_float()));
            for &b in &cfg.bits {
                for &h in &cfg.h {
                    let cells: Vec<String> = cfg
                        .modes
                        .iter()
                        .map(|&m| format!("{} {:.4}", m.name(), r.mean(b, h, m).unwrap_or(f64::NAN)))
                        .collect();
                    report.line(format!("b = {b}, h = {h:>4}: {}", cells.join(", ")));
                }
            }
            emit(cli, "accuracy", &r.result, &report)
        }
        Command::NoiseSweep(a) => {
            let mut l = file.section("noise_sweep", &cli.overrides)?;
            l.set("bits", int(a.bits));
            l.set("h", int(a.h));
            l.set_list("moduli", ints(a.moduli.as_ref()).as_ref());
            l.set_list("redundant", ints(a.redundant.as_ref()).as_ref());
            l.set_list("redundancy", ints(a.redundancy.as_ref()).as_ref());
            l.set_list("p", a.p.as_ref());
            l.set_list("attempts", ints(a.attempts.as_ref()).as_ref());
            l.set("seed", int(a.seed));
            l.set("samples", int(a.samples));
            l.set("rate_trials", int(a.rate_trials));
            let cfg: NoiseSweepConfig = l.build("noise_sweep")?;
            let (model, data) = (digits_model::<f64>(), digits_test_set::<f64>());
            let r = noise_sweep(&model, &data, &cfg)?;
            report.line(format!(
                "noise sweep, b = {}, h = {}; float accuracy {:.4}; {} MVM outputs per inference",
                cfg.bits, cfg.h, r.float_accuracy, r.outputs_per_inference
            ));
            report.line("p_err at which accuracy first drops below 0.99 x float:");
            for row in &r.cutoffs.rows {
                let shown = if row[3].is_empty() { "not reached".to_string() } else { format!("p = {}, p_err = {}", row[2], row[3]) };
                report.line(format!("  n-k = {}, R = {}: {shown}", row[0], row[1]));
            }
            if let Some(c) = &a.cutoffs {
                write_csv(&r.cutoffs, c)?;
            }
            emit(cli, "noise-sweep", &r.sweep, &report)
        }
        Command::RrnsPerr(a) => {
            let mut l = file.section("rrns_perr", &cli.overrides)?;
            let moduli = match &a.preset {
                Some(name) => Some(preset_moduli(name)?),
                None => a.moduli.clone(),
            };
            l.set_list("moduli", ints(moduli.as_ref()).as_ref());
            l.set("k", int(a.k));
            l.set_list("p", a.p.as_ref());
            l.set_list("attempts", ints(a.attempts.as_ref()).as_ref());
            l.set("trials", int(a.trials));
            l.set("seed", int(a.seed));
            l.set("exact", a.exact);
            let cfg: PerrConfig = l.build("rrns_perr")?;
            let r = perr_sweep(&cfg)?;
            report.line(format!("RRNS moduli {:?}, k = {}, {} trials per point", cfg.moduli, cfg.k, cfg.trials));
            for pt in &r.points {
                report.line(format!(
                    "p = {:<6} R = {:>2}: p_err analytic {:.4e}, simulated {:.4e} (limit {:.4e})",
                    fmt(pt.p),
                    pt.attempts,
                    pt.analytic,
                    pt.empirical,
                    pt.limit
                ));
            }
            emit(cli, "rrns-perr", &r.result, &report)
        }
        Command::Energy(a) => {
            let mut l = file.section("energy", &cli.overrides)?;
            let bits = match &a.preset {
                Some(name) => {
                    let n = preset_moduli(name)?;
                    Some(vec![ModuliSet::new(&n)?.bit_width()])
                }
                None => a.bits.clone(),
            };
            l.set_list("bits", ints(bits.as_ref()).as_ref());
            l.set("h", int(a.h));
            let cfg: EnergyConfig = l.build("energy")?;
            let r = energy_experiment(&cfg)?;
            for row in r.rows.iter().step_by(2) {
                let ratio: f64 = row[6].parse().expect("numeric ratio");
                report.line(format!("b = {}, h = {}: fixed-point / RNS ADC energy ratio = {ratio:.4e} ({ratio:.1}x)", row[0], cfg.h));
            }
            emit(cli, "energy", &r, &report)
        }
        Command::Infer(a) => {
            let mut l = file.section("infer", &cli.overrides)?;
            l.set("manifest", a.manifest.as_ref().map(|p| p.display().to_string()));
            l.set("data", a.data.as_ref().map(|p| p.display().to_string()));
            l.set("mode", a.mode.clone());
            l.set("bits", int(a.bits));
            l.set("h", int(a.h));
            l.set("b_adc", int(a.b_adc));
            l.set_list("moduli", ints(a.moduli.as_ref()).as_ref());
            l.set_list("redundant", ints(a.redundant.as_ref()).as_ref());
            l.set("attempts", int(a.attempts));
            l.set("p", a.p);
            l.set("samples", int(a.samples));
            l.set("seed", int(a.seed));
            infer(cli, l, &report)
        }
    }
}

fn convert(value: i64, moduli: Option<&[u64]>, preset_name: Option<&str>) -> Result<(), Failure> {
    let ms = match (moduli, preset_name) {
        (Some(m), _) => ModuliSet::new(m)?,
        (None, Some(name)) => ModuliSet::new(&preset_moduli(name)?)?,
        (None, None) => return Err(Failure::Config("give --moduli or --preset".into())),
    };
    let (residues, back) = if value >= 0 {
        if value as u64 >= ms.range() {
            return Err(Failure::Config(format!("value {value} is not below the dynamic range M = {}", ms.range())));
        }
        let r = ms.residues_of(value as u64);
        let back = ms.crt_reconstruct(&r)? as i64;
        (r, back)
    } else {
        let r = ms.forward_convert(value)?;
        let back = ms.decode_signed(&r)?;
        (r, back)
    };
    let shown: Vec<String> = residues.iter().map(u32::to_string).collect();
    println!("residues: {}; reconstructed: {back}", shown.join(","));
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum InferMode {
    Float,
    Rns,
    FixedPoint,
    Rrns,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct InferConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    manifest: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    data: Option<PathBuf>,
    mode: InferMode,
    bits: u32,
    h: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    b_adc: Option<u32>,
    moduli: Vec<u64>,
    redundant: Vec<u64>,
    attempts: u32,
    p: f64,
    samples: usize,
    seed: u64,
}

impl Default for InferConfig {
    fn default() -> Self {
        Self {
            manifest: None,
            data: None,
            mode: InferMode::Rns,
            bits: 6,
            h: 128,
            b_adc: None,
            moduli: Vec::new(),
            redundant: Vec::new(),
            attempts: 1,
            p: 0.0,
            samples: 0,
            seed: DEFAULT_SEED,
        }
    }
}

impl InferConfig {
    fn moduli(&self) -> Result<Vec<u64>, Failure> {
        if !self.moduli.is_empty() {
            return Ok(self.moduli.clone());
        }
        let ms = preset_for_bits(self.bits).ok_or_else(|| Failure::Config(format!("no moduli preset for {} bits; give moduli", self.bits)))?;
        Ok(ms.moduli().iter().map(|&m| m as u64).collect())
    }

    fn backend(&self) -> Result<Backend, Failure> {
        let noise = NoiseModel::new(self.p, self.seed)?;
        let cfg = match self.mode {
            InferMode::Float => return Ok(Backend::Float),
            InferMode::Rns => CoreConfig::rns(self.h, self.bits, ModuliSet::new(&self.moduli()?)?)?,
            InferMode::FixedPoint => {
                if self.p != 0.0 {
                    return Err(Failure::Config("the fixed-point core has no residue noise; set p = 0".into()));
                }
                CoreConfig::fixed_point(self.h, self.bits, self.b_adc.unwrap_or(self.bits))?
            }
            InferMode::Rrns => CoreConfig::rrns(self.h, self.bits, RrnsCode::with_split(&self.moduli()?, &self.redundant)?, self.attempts)?,
        };
        if self.mode != InferMode::Rrns && (!self.redundant.is_empty() || self.attempts != 1) {
            return Err(Failure::Config("redundant moduli and attempts apply to mode = \"rrns\" only".into()));
        }
        Ok(Backend::Analog { cfg, noise })
    }
}

fn infer(cli: &Cli, layered: Layered, report: &Report) -> Result<(), Failure> {
    let cfg: InferConfig = layered.build("infer")?;
    let model: ModelSpec<f64> = match &cfg.manifest {
        Some(p) => ModelSpec::load(p)?,
        None => digits_model(),
    };
    let data: Dataset<f64> = match &cfg.data {
        Some(p) => Dataset::from_tensors(&TensorFile::read(p)?)?,
        None => digits_test_set(),
    };
    if data.features != model.input_len() {
        return Err(Failure::Config(format!("data has {} features, model expects {}", data.features, model.input_len())));
    }
    let data = if cfg.samples == 0 || cfg.samples >= data.len() { data } else { data.select(&data.subset_indices(cfg.samples, cfg.seed)) };
    let backend = cfg.backend()?;
    let stream = Stream::root(cfg.seed);

    use rayon::prelude::*;
    let outputs: Vec<(Vec<f64>, rns_analog::harness::GemmStats)> = (0..data.len())
        .into_par_iter()
        .map(|i| {
            let mut stats = Default::default();
            model.run(data.sample(i), &backend, stream.child(i as u64), &mut stats).map(|y| (y, stats))
        })
        .collect::<Result<_, _>>()?;

    let mut result = ExperimentResult::new("infer", cfg.seed, &cfg, &["index", "label", "prediction", "score"])?;
    let (mut correct, mut stats) = (0, rns_analog::harness::GemmStats::default());
    for (i, (y, s)) in outputs.iter().enumerate() {
        let pred = argmax(y);
        correct += (pred == data.labels[i]) as usize;
        stats.merge(s);
        result.push(vec![i.to_string(), data.labels[i].to_string(), pred.to_string(), fmt(y[pred])]);
    }
    let acc = if data.is_empty() { 0.0 } else { correct as f64 / data.len() as f64 };
    let mode = toml::Value::try_from(cfg.mode).map(|v| v.as_str().unwrap_or_default().to_string()).unwrap_or_default();
    report.line(format!("mode {mode}: accuracy {acc:.4} ({correct}/{})", data.len()));
    if stats.retries + stats.unresolved > 0 {
        report.line(format!("re-executed outputs {}, unresolved (zeroed) outputs {}", stats.retries, stats.unresolved));
    }
    emit(cli, "infer", &result, report)
}
