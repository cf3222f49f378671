//! Redundant residue number system: encoding, group-vote decoding with
//! Case 1/2/3 classification, and error-rate analytics for the retry
//! protocol.
//!
//! The `k` smallest moduli are the non-redundant ones and set the legitimate
//! range `M_k`. Each of the `C(n, k)` k-subsets reconstructs a candidate by
//! CRT; candidates outside `[0, M_k)` are discarded. A candidate is accepted
//! when at least `C(n - t, k)` groups back it, i.e. its codeword agrees with
//! at least `n - t` received residues, with `t = floor((n - k) / 2)`.

use std::sync::Arc;

use rayon::prelude::*;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::analog::NoiseModel;
use crate::error::{Error, Result};
use crate::rng::Stream;
use crate::rns::ModuliSet;

#[derive(Debug, Clone, PartialEq, Eq)]
struct Group {
    members: Vec<usize>,
    set: ModuliSet,
}

/// An RRNS(n, k) code.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "CodeSpec", into = "CodeSpec")]
pub struct RrnsCode {
    moduli: Arc<ModuliSet>,
    k: usize,
    non_redundant: Vec<usize>,
    legit: u64,
    t: usize,
    threshold: usize,
    groups: Vec<Group>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CodeSpec {
    moduli: Vec<u64>,
    k: usize,
}

impl TryFrom<CodeSpec> for RrnsCode {
    type Error = Error;

    fn try_from(s: CodeSpec) -> Result<Self> {
        RrnsCode::new(&s.moduli, s.k)
    }
}

impl From<RrnsCode> for CodeSpec {
    fn from(c: RrnsCode) -> Self {
        CodeSpec { moduli: c.moduli.moduli().iter().map(|&m| m as u64).collect(), k: c.k }
    }
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity(binomial(n, k));
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let Some(i) = (0..k).rev().find(|&i| idx[i] != i + n - k) else {
            return out;
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

impl RrnsCode {
    /// Code over `moduli` (kept in the given order) whose `k` smallest moduli
    /// are non-redundant.
    pub fn new(moduli: &[u64], k: usize) -> Result<Self> {
        let set = ModuliSet::new(moduli)?;
        let n = set.len();
        if k == 0 || k > n {
            return Err(Error::InvalidCode(format!("k = {k} must lie in [1, {n}]")));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&i| (set.moduli()[i], i));
        let mut non_redundant = order[..k].to_vec();
        non_redundant.sort_unstable();
        let legit = non_redundant.iter().map(|&i| set.moduli()[i] as u64).product();
        let t = (n - k) / 2;
        let groups = combinations(n, k)
            .into_iter()
            .map(|members| {
                let sub: Vec<u64> = members.iter().map(|&i| set.moduli()[i] as u64).collect();
                Group { set: ModuliSet::new(&sub).expect("subset of a co-prime set"), members }
            })
            .collect();
        Ok(Self { moduli: Arc::new(set), k, non_redundant, legit, t, threshold: binomial(n - t, k), groups })
    }

    /// Code from an explicit split; every redundant modulus must be at least
    /// as large as every non-redundant one.
    pub fn with_split(non_redundant: &[u64], redundant: &[u64]) -> Result<Self> {
        if let (Some(&lo), Some(&hi)) = (redundant.iter().min(), non_redundant.iter().max()) {
            if lo < hi {
                return Err(Error::InvalidCode(format!(
                    "redundant modulus {lo} is smaller than non-redundant modulus {hi}"
                )));
            }
        }
        let all: Vec<u64> = non_redundant.iter().chain(redundant).copied().collect();
        Self::new(&all, non_redundant.len())
    }

    pub fn moduli(&self) -> &Arc<ModuliSet> {
        &self.moduli
    }

    pub fn n(&self) -> usize {
        self.moduli.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Positions (in moduli order) of the non-redundant moduli.
    pub fn non_redundant(&self) -> &[usize] {
        &self.non_redundant
    }

    /// `M_k`, the product of the non-redundant moduli.
    pub fn legitimate_range(&self) -> u64 {
        self.legit
    }

    /// Guaranteed correction capability `floor((n - k) / 2)`.
    pub fn t(&self) -> usize {
        self.t
    }

    pub fn groups(&self) -> usize {
        self.groups.len()
    }

    /// Votes a candidate needs to be accepted: `C(n - t, k)`.
    pub fn vote_threshold(&self) -> usize {
        self.threshold
    }

    pub fn encode(&self, value: u64) -> Result<Vec<u32>> {
        if value >= self.legit {
            return Err(Error::OutOfLegitimateRange { value: value as u128, limit: self.legit as u128 });
        }
        Ok(self.moduli.residues_of(value))
    }

    /// Offset used to carry signed values: `v` is coded as `v + offset`.
    pub fn signed_offset(&self) -> u64 {
        (self.legit - 1) / 2
    }

    pub fn encode_signed(&self, value: i64) -> Result<Vec<u32>> {
        let off = self.signed_offset() as i128;
        if (value as i128).abs() > off {
            return Err(Error::OutOfRange { value: value as i128, lo: -(off as i64), hi: off as i64 });
        }
        self.encode((value as i128 + off) as u64)
    }

    /// Turn residues of a raw signed integer (e.g. an analog dot product)
    /// into residues of its offset codeword.
    pub fn apply_signed_offset(&self, residues: &mut [u32]) {
        let off = self.signed_offset();
        for (r, &m) in residues.iter_mut().zip(self.moduli.moduli()) {
            *r = ((*r as u64 + off % m as u64) % m as u64) as u32;
        }
    }

    pub fn signed_value(&self, decision: Decision) -> Option<i64> {
        match decision {
            Decision::Corrected(v) => Some(v as i64 - self.signed_offset() as i64),
            Decision::DetectedUncorrectable => None,
        }
    }

    /// Majority vote over all `C(n, k)` CRT groups.
    pub fn vote_decode(&self, residues: &[u32]) -> Result<VoteOutcome> {
        if residues.len() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), actual: residues.len() });
        }
        for (&r, &m) in residues.iter().zip(self.moduli.moduli()) {
            if r >= m {
                return Err(Error::InvalidResidue { residue: r, modulus: m });
            }
        }
        Ok(self.vote_unchecked(residues))
    }

    fn vote_unchecked(&self, residues: &[u32]) -> VoteOutcome {
        let mut buf = Vec::with_capacity(self.k);
        let mut tally: Vec<(u64, usize)> = Vec::with_capacity(self.groups.len());
        for g in &self.groups {
            buf.clear();
            buf.extend(g.members.iter().map(|&i| residues[i]));
            let v = g.set.crt_unchecked(&buf);
            if v >= self.legit {
                continue;
            }
            match tally.iter_mut().find(|(c, _)| *c == v) {
                Some((_, n)) => *n += 1,
                None => tally.push((v, 1)),
            }
        }
        let best = tally.iter().copied().max_by_key(|&(v, n)| (n, std::cmp::Reverse(v)));
        let (decision, groups_agreeing) = match best {
            Some((v, n)) if n >= self.threshold => (Decision::Corrected(v), n),
            Some((_, n)) => (Decision::DetectedUncorrectable, n),
            None => (Decision::DetectedUncorrectable, 0),
        };
        VoteOutcome { decision, groups_agreeing, groups_total: self.groups.len() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Corrected(u64),
    DetectedUncorrectable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VoteOutcome {
    pub decision: Decision,
    /// Groups backing the most-voted valid candidate.
    pub groups_agreeing: usize,
    pub groups_total: usize,
}

/// Ground-truth classification of a decode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Case {
    /// Case 1: no error, or the error was corrected.
    Correct,
    /// Case 2: detected, not correctable.
    Detected,
    /// Case 3: decoded to a wrong codeword without detection.
    Undetected,
}

pub fn classify_case(outcome: &VoteOutcome, truth: u64) -> Case {
    match outcome.decision {
        Decision::Corrected(v) if v == truth => Case::Correct,
        Decision::Corrected(_) => Case::Undetected,
        Decision::DetectedUncorrectable => Case::Detected,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CaseCounts {
    pub correct: u64,
    pub detected: u64,
    pub undetected: u64,
}

impl CaseCounts {
    fn add(mut self, case: Case) -> Self {
        match case {
            Case::Correct => self.correct += 1,
            Case::Detected => self.detected += 1,
            Case::Undetected => self.undetected += 1,
        }
        self
    }

    fn merge(self, o: Self) -> Self {
        Self {
            correct: self.correct + o.correct,
            detected: self.detected + o.detected,
            undetected: self.undetected + o.undetected,
        }
    }

    pub fn total(&self) -> u64 {
        self.correct + self.detected + self.undetected
    }
}

/// Single-attempt case probabilities `(p_c, p_d, p_u)` at residue error rate `p`.
/// `trials == 0` marks exactly enumerated rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRates {
    pub p: f64,
    pub p_c: f64,
    pub p_d: f64,
    pub p_u: f64,
    pub trials: u64,
    pub counts: CaseCounts,
}

impl ErrorRates {
    pub fn from_counts(p: f64, counts: CaseCounts) -> Self {
        let n = counts.total();
        let f = |c: u64| if n == 0 { 0.0 } else { c as f64 / n as f64 };
        Self { p, p_c: f(counts.correct), p_d: f(counts.detected), p_u: f(counts.undetected), trials: n, counts }
    }
}

/// Probability that the output is wrong after up to `attempts` tries, each
/// retry triggered by a Case-2 detection:
/// `1 - p_c * sum_{j=0}^{R-1} p_d^j`.
pub fn p_err_retry(rates: &ErrorRates, attempts: u32) -> f64 {
    let mut geo = 0.0;
    let mut term = 1.0;
    for _ in 0..attempts {
        geo += term;
        term *= rates.p_d;
    }
    (1.0 - rates.p_c * geo).clamp(0.0, 1.0)
}

/// `lim_{R -> inf} p_err(R) = p_u / (p_u + p_c)`.
pub fn p_err_limit(rates: &ErrorRates) -> f64 {
    let denom = rates.p_u + rates.p_c;
    if denom == 0.0 {
        1.0
    } else {
        rates.p_u / denom
    }
}

fn trial_value(code: &RrnsCode, trial: Stream) -> u64 {
    trial.child(0).rng().gen_range(0..code.legit)
}

fn attempt_case(code: &RrnsCode, value: u64, noise: &NoiseModel, trial: Stream, attempt: u32) -> Case {
    let mut residues = code.moduli.residues_of(value);
    let stream = trial.child(attempt as u64 + 1);
    for (i, r) in residues.iter_mut().enumerate() {
        noise.corrupt_lane(std::slice::from_mut(r), code.moduli.moduli()[i], &mut stream.child(i as u64).rng());
    }
    classify_case(&code.vote_unchecked(&residues), value)
}

/// Monte Carlo estimate of `(p_c, p_d, p_u)`. Trial `i` draws from
/// `Stream::root(noise.seed).child(i)`, so results do not depend on the
/// number of worker threads.
pub fn estimate_rates(code: &RrnsCode, noise: &NoiseModel, trials: u64) -> ErrorRates {
    let root = Stream::root(noise.seed);
    let counts = (0..trials)
        .into_par_iter()
        .map(|i| {
            let trial = root.child(i);
            let value = trial_value(code, trial);
            CaseCounts::default().add(attempt_case(code, value, noise, trial, 0))
        })
        .reduce(CaseCounts::default, CaseCounts::merge);
    ErrorRates::from_counts(noise.p, counts)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryEstimate {
    pub trials: u64,
    pub errors: u64,
    pub p_err: f64,
}

/// Simulate the retry protocol: re-execute on Case 2 (fresh noise per
/// attempt), stop on Case 1 or 3. The first attempt of trial `i` sees the same
/// noise as trial `i` of [`estimate_rates`] with the same seed.
pub fn retry_protocol_simulate(code: &RrnsCode, noise: &NoiseModel, attempts: u32, trials: u64) -> RetryEstimate {
    let root = Stream::root(noise.seed);
    let errors: u64 = (0..trials)
        .into_par_iter()
        .map(|i| {
            let trial = root.child(i);
            let value = trial_value(code, trial);
            for a in 0..attempts {
                match attempt_case(code, value, noise, trial, a) {
                    Case::Correct => return 0,
                    Case::Undetected => return 1,
                    Case::Detected => {}
                }
            }
            1
        })
        .sum();
    let p_err = if trials == 0 { 0.0 } else { errors as f64 / trials as f64 };
    RetryEstimate { trials, errors, p_err }
}

/// Exact single-attempt rates by enumerating every received word against
/// every legitimate value. Independent of the Monte Carlo path; feasible for
/// small codes only.
#[derive(Debug, Clone)]
pub struct ExactRates {
    moduli: Vec<u32>,
    legit: u64,
    /// Integer case counts per error-position mask.
    counts: Vec<CaseCounts>,
}

impl ExactRates {
    pub fn enumerate(code: &RrnsCode, max_work: u64) -> Result<Self> {
        let m = code.moduli.range();
        let work = (m as u128) * code.legit as u128;
        if work > max_work as u128 {
            return Err(Error::InvalidCode(format!("{work} word/value pairs exceed the enumeration budget")));
        }
        let n = code.n();
        let moduli = code.moduli.moduli().to_vec();
        let words: Vec<Vec<u32>> = (0..m).map(|w| code.moduli.residues_of(w)).collect();
        let decoded: Vec<Decision> =
            words.par_iter().map(|r| code.vote_unchecked(r).decision).collect();
        let per_value: Vec<Vec<CaseCounts>> = (0..code.legit)
            .into_par_iter()
            .map(|v| {
                let cw = code.moduli.residues_of(v);
                let mut table = vec![CaseCounts::default(); 1 << n];
                for (word, dec) in words.iter().zip(&decoded) {
                    let mask = (0..n).filter(|&i| word[i] != cw[i]).fold(0usize, |acc, i| acc | 1 << i);
                    let case = match *dec {
                        Decision::Corrected(x) if x == v => Case::Correct,
                        Decision::Corrected(_) => Case::Undetected,
                        Decision::DetectedUncorrectable => Case::Detected,
                    };
                    table[mask] = table[mask].add(case);
                }
                table
            })
            .collect();
        let mut counts = vec![CaseCounts::default(); 1 << n];
        for table in per_value {
            for (acc, c) in counts.iter_mut().zip(table) {
                *acc = acc.merge(c);
            }
        }
        Ok(Self { moduli, legit: code.legit, counts })
    }

    pub fn rates(&self, p: f64) -> ErrorRates {
        let n = self.moduli.len();
        let (mut c, mut d, mut u) = (0.0, 0.0, 0.0);
        for (mask, cc) in self.counts.iter().enumerate() {
            let errs = mask.count_ones() as i32;
            let patterns: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| (self.moduli[i] - 1) as f64).product();
            let w = p.powi(errs) * (1.0 - p).powi(n as i32 - errs) / (patterns * self.legit as f64);
            c += w * cc.correct as f64;
            d += w * cc.detected as f64;
            u += w * cc.undetected as f64;
        }
        ErrorRates { p, p_c: c, p_d: d, p_u: u, trials: 0, counts: CaseCounts::default() }
    }

    /// Integer case counts for words with errors exactly at `mask`.
    pub fn counts_for_mask(&self, mask: usize) -> CaseCounts {
        self.counts[mask]
    }
}
