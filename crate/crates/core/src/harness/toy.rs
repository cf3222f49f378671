//! The bundled toy workload: a 64-32-10 MLP and 600 held-out 8x8 digits.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::harness::gemm::GemmStats;
use crate::harness::model::{argmax, Backend, ModelSpec};
use crate::harness::tensorfile::TensorFile;
use crate::rng::Stream;
use crate::scalar::Real;

const MODEL_MANIFEST: &str = include_str!("../../fixtures/digits_mlp.toml");
const MODEL_WEIGHTS: &[u8] = include_bytes!("../../fixtures/digits_mlp.rtf");
const TEST_SET: &[u8] = include_bytes!("../../fixtures/digits_test.rtf");

/// Labelled samples, each `features` long.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    pub features: usize,
    pub inputs: Vec<T>,
    pub labels: Vec<usize>,
}

impl<T: Real> Dataset<T> {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn sample(&self, i: usize) -> &[T] {
        &self.inputs[i * self.features..(i + 1) * self.features]
    }

    /// Reads tensors `x` (`[n, features]`) and `labels` (`[n]`).
    pub fn from_tensors(tf: &TensorFile) -> Result<Self> {
        let x = tf.require("x")?;
        let y = tf.require("labels")?;
        let [n, features] = x.shape[..] else {
            return Err(Error::Shape(format!("x must be 2-D, got {:?}", x.shape)));
        };
        if y.data.len() != n {
            return Err(Error::DimensionMismatch { expected: n, actual: y.data.len() });
        }
        let labels = y
            .data
            .iter()
            .map(|&v| if v >= 0.0 && v.fract() == 0.0 { Ok(v as usize) } else { Err(Error::Shape(format!("bad label {v}"))) })
            .collect::<Result<_>>()?;
        Ok(Self { features, inputs: x.data.iter().map(|&v| T::lit(v as f64)).collect(), labels })
    }

    /// The samples at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut inputs = Vec::with_capacity(indices.len() * self.features);
        indices.iter().for_each(|&i| inputs.extend_from_slice(self.sample(i)));
        Self { features: self.features, inputs, labels: indices.iter().map(|&i| self.labels[i]).collect() }
    }

    /// `count` distinct sample indices chosen by `seed` (sorted).
    pub fn subset_indices(&self, count: usize, seed: u64) -> Vec<usize> {
        use rand::seq::index::sample;
        let count = count.min(self.len());
        let mut idx = sample(&mut Stream::root(seed).child(0x5eed).rng(), self.len(), count).into_vec();
        idx.sort_unstable();
        idx
    }
}

pub fn digits_model<T: Real>() -> ModelSpec<T> {
    let tf = TensorFile::from_bytes(MODEL_WEIGHTS).expect("bundled weights are well formed");
    ModelSpec::from_manifest(MODEL_MANIFEST, &tf).expect("bundled manifest is valid")
}

pub fn digits_test_set<T: Real>() -> Dataset<T> {
    let tf = TensorFile::from_bytes(TEST_SET).expect("bundled test set is well formed");
    Dataset::from_tensors(&tf).expect("bundled test set is valid")
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Evaluation {
    pub correct: usize,
    pub total: usize,
    pub stats: GemmStats,
}

impl Evaluation {
    pub fn accuracy(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }
}

/// Top-1 accuracy. Sample `i` runs on `stream.child(i)`, so the result does
/// not depend on how the samples are spread over threads.
pub fn evaluate<T: Real>(model: &ModelSpec<T>, data: &Dataset<T>, backend: &Backend, stream: Stream) -> Result<Evaluation> {
    let per_sample: Vec<(bool, GemmStats)> = (0..data.len())
        .into_par_iter()
        .map(|i| {
            let mut stats = GemmStats::default();
            let y = model.run(data.sample(i), backend, stream.child(i as u64), &mut stats)?;
            Ok((argmax(&y) == data.labels[i], stats))
        })
        .collect::<Result<_>>()?;
    let mut ev = Evaluation { total: data.len(), ..Default::default() };
    for (ok, s) in &per_sample {
        ev.correct += *ok as usize;
        ev.stats.merge(s);
    }
    Ok(ev)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_fixtures_load() {
        let m = digits_model::<f32>();
        assert_eq!((m.input_len(), m.output_len()), (64, 10));
        let d = digits_test_set::<f32>();
        assert_eq!((d.len(), d.features), (600, 64));
        assert!(d.labels.iter().all(|&l| l < 10));
        assert!(d.inputs.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn float_baseline() {
        let ev = evaluate(&digits_model::<f64>(), &digits_test_set(), &Backend::Float, Stream::root(0)).unwrap();
        assert_eq!(ev.total, 600);
        assert!(ev.accuracy() > 0.95, "{}", ev.accuracy());
    }

    #[test]
    fn subsets_are_seeded() {
        let d = digits_test_set::<f64>();
        let a = d.subset_indices(400, 1);
        assert_eq!(a, d.subset_indices(400, 1));
        assert_ne!(a, d.subset_indices(400, 2));
        assert_eq!(a.len(), 400);
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(d.select(&a).len(), 400);
    }
}
