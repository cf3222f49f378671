use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analog::{CoreConfig, NoiseModel};
use crate::error::{Error, Result};
use crate::harness::gemm::{float_gemm, tiled_gemm_with_stats, GemmStats};
use crate::harness::tensorfile::TensorFile;
use crate::rng::Stream;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Identity,
    Relu,
    Softmax,
}

impl Activation {
    pub fn apply<T: Real>(self, v: &mut [T]) {
        match self {
            Activation::Identity => {}
            Activation::Relu => v.iter_mut().for_each(|x| *x = x.max(T::zero())),
            Activation::Softmax => {
                let m = v.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
                let mut sum = T::zero();
                for x in v.iter_mut() {
                    *x = (*x - m).exp();
                    sum += *x;
                }
                v.iter_mut().for_each(|x| *x /= sum);
            }
        }
    }
}

/// Geometry of a 2-D convolution over CHW tensors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvGeometry {
    pub in_channels: usize,
    pub height: usize,
    pub width: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

impl ConvGeometry {
    pub fn out_height(&self) -> usize {
        (self.height + 2 * self.padding - self.kernel) / self.stride + 1
    }

    pub fn out_width(&self) -> usize {
        (self.width + 2 * self.padding - self.kernel) / self.stride + 1
    }

    pub fn patch_len(&self) -> usize {
        self.in_channels * self.kernel * self.kernel
    }

    /// Patch matrix, one row per output position (row-major over `oh, ow`),
    /// columns ordered `(c, ky, kx)`. Out-of-bounds taps are zero.
    pub fn im2col<T: Real>(&self, x: &[T]) -> Vec<T> {
        let (oh, ow, k) = (self.out_height(), self.out_width(), self.kernel);
        let mut out = Vec::with_capacity(oh * ow * self.patch_len());
        for oy in 0..oh {
            for ox in 0..ow {
                for c in 0..self.in_channels {
                    for ky in 0..k {
                        for kx in 0..k {
                            let iy = (oy * self.stride + ky) as isize - self.padding as isize;
                            let ix = (ox * self.stride + kx) as isize - self.padding as isize;
                            let inside = iy >= 0 && ix >= 0 && (iy as usize) < self.height && (ix as usize) < self.width;
                            out.push(if inside {
                                x[(c * self.height + iy as usize) * self.width + ix as usize]
                            } else {
                                T::zero()
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LayerKind {
    Dense,
    /// Lowered to one GEMM per output position; output is CHW.
    Conv(ConvGeometry),
}

/// `y = f(W x + b)` with `W` row-major `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T> {
    pub kind: LayerKind,
    pub weight: Vec<T>,
    pub rows: usize,
    pub cols: usize,
    pub bias: Option<Vec<T>>,
    pub activation: Activation,
}

impl<T: Real> Layer<T> {
    pub fn dense(weight: Vec<T>, rows: usize, cols: usize, bias: Option<Vec<T>>, activation: Activation) -> Result<Self> {
        let l = Self { kind: LayerKind::Dense, weight, rows, cols, bias, activation };
        l.validate()?;
        Ok(l)
    }

    pub fn conv(weight: Vec<T>, out_channels: usize, geom: ConvGeometry, bias: Option<Vec<T>>, activation: Activation) -> Result<Self> {
        if geom.kernel == 0 || geom.stride == 0 || geom.height + 2 * geom.padding < geom.kernel || geom.width + 2 * geom.padding < geom.kernel {
            return Err(Error::Shape(format!("invalid conv geometry {geom:?}")));
        }
        let l = Self { kind: LayerKind::Conv(geom), weight, rows: out_channels, cols: geom.patch_len(), bias, activation };
        l.validate()?;
        Ok(l)
    }

    fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::Shape("layer with an empty weight matrix".into()));
        }
        if self.weight.len() != self.rows * self.cols {
            return Err(Error::Shape(format!("weight has {} values, expected {}x{}", self.weight.len(), self.rows, self.cols)));
        }
        if let Some(b) = &self.bias {
            if b.len() != self.rows {
                return Err(Error::Shape(format!("bias has {} values, expected {}", b.len(), self.rows)));
            }
        }
        let all = self.weight.iter().chain(self.bias.iter().flatten());
        if let Some(i) = all.clone().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(())
    }

    pub fn input_len(&self) -> usize {
        match &self.kind {
            LayerKind::Dense => self.cols,
            LayerKind::Conv(g) => g.in_channels * g.height * g.width,
        }
    }

    pub fn output_len(&self) -> usize {
        match &self.kind {
            LayerKind::Dense => self.rows,
            LayerKind::Conv(g) => self.rows * g.out_height() * g.out_width(),
        }
    }
}

/// Where the GEMMs of a forward pass run.
#[derive(Debug, Clone, PartialEq)]
pub enum Backend {
    Float,
    Analog { cfg: CoreConfig, noise: NoiseModel },
}

/// An ordered stack of layers.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec<T> {
    layers: Vec<Layer<T>>,
}

impl<T: Real> ModelSpec<T> {
    pub fn new(layers: Vec<Layer<T>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Shape("model has no layers".into()));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].output_len() != pair[1].input_len() {
                return Err(Error::Shape(format!(
                    "layer {i} produces {} values but layer {} expects {}",
                    pair[0].output_len(),
                    i + 1,
                    pair[1].input_len()
                )));
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn input_len(&self) -> usize {
        self.layers[0].input_len()
    }

    pub fn output_len(&self) -> usize {
        self.layers[self.layers.len() - 1].output_len()
    }

    /// Build from a TOML manifest whose tensor names refer to `tensors`.
    pub fn from_manifest(manifest: &str, tensors: &TensorFile) -> Result<Self> {
        let m: Manifest = toml::from_str(manifest).map_err(|e| Error::Manifest(e.to_string()))?;
        m.build(tensors)
    }

    /// Load a manifest; its `weights` path is resolved relative to the manifest.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let m: Manifest = toml::from_str(&text).map_err(|e| Error::Manifest(e.to_string()))?;
        let dir = path.parent().unwrap_or(Path::new("."));
        let tensors = TensorFile::read(dir.join(&m.weights))?;
        m.build(&tensors)
    }

    /// Forward pass. Layer `l` draws noise from `stream.child(l)`, and
    /// GEMM number `g` inside it from `stream.child(l).child(g)`.
    pub fn run(&self, input: &[T], backend: &Backend, stream: Stream, stats: &mut GemmStats) -> Result<Vec<T>> {
        if input.len() != self.input_len() {
            return Err(Error::Shape(format!("input has {} values, model expects {}", input.len(), self.input_len())));
        }
        let mut x = input.to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            let ls = stream.child(l as u64);
            let gemm = |xs: &[T], g: usize, stats: &mut GemmStats| -> Result<Vec<T>> {
                match backend {
                    Backend::Float => float_gemm(&layer.weight, layer.rows, layer.cols, xs),
                    Backend::Analog { cfg, noise } => {
                        tiled_gemm_with_stats(&layer.weight, layer.rows, layer.cols, xs, cfg, noise, ls.child(g as u64), stats)
                    }
                }
            };
            let mut y = match &layer.kind {
                LayerKind::Dense => {
                    let mut y = gemm(&x, 0, stats)?;
                    if let Some(b) = &layer.bias {
                        y.iter_mut().zip(b).for_each(|(v, &b)| *v += b);
                    }
                    y
                }
                LayerKind::Conv(g) => {
                    let patches = g.im2col(&x);
                    let positions = g.out_height() * g.out_width();
                    let mut y = vec![T::zero(); layer.rows * positions];
                    for (pos, patch) in patches.chunks_exact(layer.cols).enumerate() {
                        let col = gemm(patch, pos, stats)?;
                        for (c, v) in col.into_iter().enumerate() {
                            let b = layer.bias.as_ref().map_or(T::zero(), |b| b[c]);
                            y[c * positions + pos] = v + b;
                        }
                    }
                    y
                }
            };
            layer.activation.apply(&mut y);
            x = y;
        }
        Ok(x)
    }
}

/// Run `model` on one input with no statistics collection.
pub fn run_network<T: Real>(model: &ModelSpec<T>, input: &[T], backend: &Backend, stream: Stream) -> Result<Vec<T>> {
    model.run(input, backend, stream, &mut GemmStats::default())
}

pub fn argmax<T: Real>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    weights: String,
    layers: Vec<LayerEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case", tag = "kind")]
enum LayerEntry {
    Dense {
        weight: String,
        bias: Option<String>,
        #[serde(default)]
        activation: Activation,
    },
    Conv2d {
        weight: String,
        bias: Option<String>,
        #[serde(default)]
        activation: Activation,
        input: [usize; 3],
        #[serde(default = "one")]
        stride: usize,
        #[serde(default)]
        padding: usize,
    },
}

fn one() -> usize {
    1
}

impl Manifest {
    fn build<T: Real>(&self, tensors: &TensorFile) -> Result<ModelSpec<T>> {
        let fetch = |name: &str| -> Result<(Vec<T>, Vec<usize>)> {
            let t = tensors.require(name)?;
            Ok((t.data.iter().map(|&v| T::lit(v as f64)).collect(), t.shape.clone()))
        };
        let bias = |name: &Option<String>| -> Result<Option<Vec<T>>> { name.as_deref().map(|n| fetch(n).map(|b| b.0)).transpose() };
        let mut layers = Vec::with_capacity(self.layers.len());
        for entry in &self.layers {
            layers.push(match entry {
                LayerEntry::Dense { weight, bias: b, activation } => {
                    let (w, shape) = fetch(weight)?;
                    let [rows, cols] = shape[..] else {
                        return Err(Error::Shape(format!("dense weight {weight} must be 2-D, got {shape:?}")));
                    };
                    Layer::dense(w, rows, cols, bias(b)?, *activation)?
                }
                LayerEntry::Conv2d { weight, bias: b, activation, input, stride, padding } => {
                    let (w, shape) = fetch(weight)?;
                    let [oc, ic, kh, kw] = shape[..] else {
                        return Err(Error::Shape(format!("conv weight {weight} must be 4-D, got {shape:?}")));
                    };
                    if kh != kw || ic != input[0] {
                        return Err(Error::Shape(format!("conv weight {weight} {shape:?} does not fit input {input:?}")));
                    }
                    let geom = ConvGeometry {
                        in_channels: ic,
                        height: input[1],
                        width: input[2],
                        kernel: kh,
                        stride: *stride,
                        padding: *padding,
                    };
                    Layer::conv(w, oc, geom, bias(b)?, *activation)?
                }
            });
        }
        ModelSpec::new(layers)
    }
}
