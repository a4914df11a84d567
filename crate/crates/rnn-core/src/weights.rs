//! The canonical LSTM weight record.
//!
//! Layout per layer `l`, with hidden size `H` and layer input width `D`
//! (`D = X` for the first layer, `H` above): four input-to-hidden
//! matrices `H x D`, four hidden-to-hidden matrices `H x H`, four
//! input-to-hidden bias vectors, four hidden-to-hidden bias vectors,
//! one per gate in the fixed order input/forget/cell/output. A final
//! projection `W_out: Y x H`, `b_out: Y` produces output logits.
//!
//! Flattening walks layers in order and, within a layer, the groups
//! `w_ih, w_hh, b_ih, b_hh` with gates in canonical order, then
//! `w_out, b_out`. Serialization and permutation code all rely on this
//! one ordering.

use std::error::Error;
use std::fmt;

use numkit::{Real, RngStream, Tensor};

pub const GATES: usize = 4;
pub const GATE_NAMES: [&str; GATES] = ["i", "f", "c", "o"];

#[derive(Debug, Clone, PartialEq)]
pub enum RnnError {
    Shape { detail: String },
    Length { expected: usize, got: usize },
    MissingTensor { name: String },
    BadPermutation { detail: String },
}

impl fmt::Display for RnnError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RnnError::Shape { detail } => write!(f, "shape error: {detail}"),
            RnnError::Length { expected, got } => {
                write!(f, "flat vector length {got}, expected {expected}")
            }
            RnnError::MissingTensor { name } => write!(f, "missing tensor `{name}`"),
            RnnError::BadPermutation { detail } => write!(f, "bad permutation: {detail}"),
        }
    }
}

impl Error for RnnError {}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LstmDims {
    pub layers: usize,
    pub hidden: usize,
    pub input: usize,
    pub output: usize,
}

impl LstmDims {
    pub fn new(layers: usize, hidden: usize, input: usize, output: usize) -> Self {
        assert!(layers >= 1 && hidden >= 1 && input >= 1 && output >= 1);
        Self {
            layers,
            hidden,
            input,
            output,
        }
    }

    /// Input width of layer `l` (0-based).
    pub fn layer_input(&self, l: usize) -> usize {
        if l == 0 {
            self.input
        } else {
            self.hidden
        }
    }

    pub fn param_count(&self) -> usize {
        let mut total = 0;
        for l in 0..self.layers {
            let d = self.layer_input(l);
            total += GATES * (self.hidden * d + self.hidden * self.hidden + 2 * self.hidden);
        }
        total + self.output * self.hidden + self.output
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerWeights<T> {
    pub w_ih: [Tensor<T>; GATES],
    pub w_hh: [Tensor<T>; GATES],
    pub b_ih: [Tensor<T>; GATES],
    pub b_hh: [Tensor<T>; GATES],
}

#[derive(Clone, Debug, PartialEq)]
pub struct LstmWeights<T> {
    pub dims: LstmDims,
    pub layers: Vec<LayerWeights<T>>,
    pub w_out: Tensor<T>,
    pub b_out: Tensor<T>,
}

impl<T: Real> LstmWeights<T> {
    pub fn zeros(dims: LstmDims) -> Self {
        let layers = (0..dims.layers)
            .map(|l| {
                let d = dims.layer_input(l);
                LayerWeights {
                    w_ih: std::array::from_fn(|_| Tensor::zeros(&[dims.hidden, d])),
                    w_hh: std::array::from_fn(|_| Tensor::zeros(&[dims.hidden, dims.hidden])),
                    b_ih: std::array::from_fn(|_| Tensor::zeros(&[dims.hidden])),
                    b_hh: std::array::from_fn(|_| Tensor::zeros(&[dims.hidden])),
                }
            })
            .collect();
        Self {
            dims,
            layers,
            w_out: Tensor::zeros(&[dims.output, dims.hidden]),
            b_out: Tensor::zeros(&[dims.output]),
        }
    }

    /// Fan-in initialization: every weight uniform in `±1/sqrt(H)`.
    pub fn init_uniform(dims: LstmDims, rng: &mut RngStream) -> Self {
        let bound = 1.0 / (dims.hidden as f64).sqrt();
        let mut w = Self::zeros(dims);
        for t in w.tensors_mut() {
            for v in t.data_mut() {
                *v = T::from_f64(rng.uniform(-bound, bound));
            }
        }
        w
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            out.extend(layer.w_ih.iter_mut());
            out.extend(layer.w_hh.iter_mut());
            out.extend(layer.b_ih.iter_mut());
            out.extend(layer.b_hh.iter_mut());
        }
        out.push(&mut self.w_out);
        out.push(&mut self.b_out);
        out
    }

    fn tensors(&self) -> Vec<&Tensor<T>> {
        let mut out = Vec::new();
        for layer in &self.layers {
            out.extend(layer.w_ih.iter());
            out.extend(layer.w_hh.iter());
            out.extend(layer.b_ih.iter());
            out.extend(layer.b_hh.iter());
        }
        out.push(&self.w_out);
        out.push(&self.b_out);
        out
    }

    /// Canonical named-tensor view (the serialization order).
    pub fn named_tensors(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            for (group, tensors) in [
                ("w_ih", &layer.w_ih),
                ("w_hh", &layer.w_hh),
                ("b_ih", &layer.b_ih),
                ("b_hh", &layer.b_hh),
            ] {
                for (g, t) in tensors.iter().enumerate() {
                    out.push((format!("l{l}.{group}.{}", GATE_NAMES[g]), t));
                }
            }
        }
        out.push(("w_out".to_string(), &self.w_out));
        out.push(("b_out".to_string(), &self.b_out));
        out
    }

    /// Rebuild from named tensors (any order, names must match).
    pub fn from_named(dims: LstmDims, entries: &[(String, Tensor<T>)]) -> Result<Self, RnnError> {
        let mut w = Self::zeros(dims);
        let lookup = |name: &str| -> Result<&Tensor<T>, RnnError> {
            entries
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, t)| t)
                .ok_or_else(|| RnnError::MissingTensor { name: name.into() })
        };
        for l in 0..dims.layers {
            for g in 0..GATES {
                let gate = GATE_NAMES[g];
                w.layers[l].w_ih[g] = lookup(&format!("l{l}.w_ih.{gate}"))?.clone();
                w.layers[l].w_hh[g] = lookup(&format!("l{l}.w_hh.{gate}"))?.clone();
                w.layers[l].b_ih[g] = lookup(&format!("l{l}.b_ih.{gate}"))?.clone();
                w.layers[l].b_hh[g] = lookup(&format!("l{l}.b_hh.{gate}"))?.clone();
            }
        }
        w.w_out = lookup("w_out")?.clone();
        w.b_out = lookup("b_out")?.clone();
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<(), RnnError> {
        let d = &self.dims;
        if self.layers.len() != d.layers {
            return Err(RnnError::Shape {
                detail: format!("{} layers vs dims {}", self.layers.len(), d.layers),
            });
        }
        for (l, layer) in self.layers.iter().enumerate() {
            let din = d.layer_input(l);
            for g in 0..GATES {
                let checks = [
                    (layer.w_ih[g].shape(), vec![d.hidden, din]),
                    (layer.w_hh[g].shape(), vec![d.hidden, d.hidden]),
                    (layer.b_ih[g].shape(), vec![d.hidden]),
                    (layer.b_hh[g].shape(), vec![d.hidden]),
                ];
                for (got, want) in checks {
                    if got != want.as_slice() {
                        return Err(RnnError::Shape {
                            detail: format!("layer {l} gate {g}: {got:?} vs {want:?}"),
                        });
                    }
                }
            }
        }
        if self.w_out.shape() != [d.output, d.hidden] || self.b_out.shape() != [d.output] {
            return Err(RnnError::Shape {
                detail: "output head shape mismatch".into(),
            });
        }
        Ok(())
    }

    /// Flatten into one parameter vector in canonical order.
    pub fn flatten(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.dims.param_count());
        for t in self.tensors() {
            out.extend_from_slice(t.data());
        }
        out
    }

    /// Inverse of [`flatten`]; rejects wrong lengths.
    pub fn unflatten(dims: LstmDims, flat: &[T]) -> Result<Self, RnnError> {
        if flat.len() != dims.param_count() {
            return Err(RnnError::Length {
                expected: dims.param_count(),
                got: flat.len(),
            });
        }
        let mut w = Self::zeros(dims);
        let mut pos = 0;
        for t in w.tensors_mut() {
            let n = t.len();
            t.data_mut().copy_from_slice(&flat[pos..pos + n]);
            pos += n;
        }
        Ok(w)
    }

    pub fn cast<U: Real>(&self) -> LstmWeights<U> {
        LstmWeights {
            dims: self.dims,
            layers: self
                .layers
                .iter()
                .map(|l| LayerWeights {
                    w_ih: std::array::from_fn(|g| l.w_ih[g].cast()),
                    w_hh: std::array::from_fn(|g| l.w_hh[g].cast()),
                    b_ih: std::array::from_fn(|g| l.b_ih[g].cast()),
                    b_hh: std::array::from_fn(|g| l.b_hh[g].cast()),
                })
                .collect(),
            w_out: self.w_out.cast(),
            b_out: self.b_out.cast(),
        }
    }
}
