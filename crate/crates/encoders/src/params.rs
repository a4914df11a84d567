//! Named parameter sets shared by every encoder: construction, tape
//! loading, flat views for the optimizer, and container persistence.

use std::collections::HashMap;
use std::path::Path;

use numkit::{container, Gradients, Real, RngStream, Tape, Tensor, TensorId};

#[derive(Clone, Debug)]
pub struct ParamSet<T> {
    entries: Vec<(String, Tensor<T>)>,
}

impl<T: Real> Default for ParamSet<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> ParamSet<T> {
    pub fn new() -> Self {
        Self {
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, name: impl Into<String>, tensor: Tensor<T>) {
        let name = name.into();
        debug_assert!(
            !self.entries.iter().any(|(n, _)| *n == name),
            "duplicate parameter {name}"
        );
        self.entries.push((name, tensor));
    }

    /// Uniform init in `±bound`.
    pub fn push_uniform(
        &mut self,
        name: impl Into<String>,
        shape: &[usize],
        bound: f64,
        rng: &mut RngStream,
    ) {
        let numel: usize = shape.iter().product();
        let data = (0..numel)
            .map(|_| T::from_f64(rng.uniform(-bound, bound)))
            .collect();
        self.push(name, Tensor::new(shape.to_vec(), data).expect("shape"));
    }

    pub fn push_zeros(&mut self, name: impl Into<String>, shape: &[usize]) {
        self.push(name, Tensor::zeros(shape));
    }

    pub fn entries(&self) -> &[(String, Tensor<T>)] {
        &self.entries
    }

    pub fn get(&self, name: &str) -> &Tensor<T> {
        &self
            .entries
            .iter()
            .find(|(n, _)| n == name)
            .unwrap_or_else(|| panic!("missing parameter {name}"))
            .1
    }

    pub fn tensors(&self) -> Vec<Tensor<T>> {
        self.entries.iter().map(|(_, t)| t.clone()).collect()
    }

    pub fn names(&self) -> Vec<String> {
        self.entries.iter().map(|(n, _)| n.clone()).collect()
    }

    pub fn flat_len(&self) -> usize {
        self.entries.iter().map(|(_, t)| t.len()).sum()
    }

    pub fn flatten(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.flat_len());
        for (_, t) in &self.entries {
            out.extend_from_slice(t.data());
        }
        out
    }

    pub fn set_from_flat(&mut self, flat: &[T]) {
        assert_eq!(flat.len(), self.flat_len());
        let mut pos = 0;
        for (_, t) in self.entries.iter_mut() {
            let n = t.len();
            t.data_mut().copy_from_slice(&flat[pos..pos + n]);
            pos += n;
        }
    }

    pub fn load_on_tape(&self, tape: &mut Tape<T>, requires_grad: bool) -> ParamIds {
        let mut ids = Vec::with_capacity(self.entries.len());
        let mut index = HashMap::with_capacity(self.entries.len());
        for (i, (name, t)) in self.entries.iter().enumerate() {
            ids.push(tape.leaf(t.clone(), requires_grad));
            index.insert(name.clone(), i);
        }
        ParamIds { ids, index }
    }

    /// Gradients in flatten order; zeros for parameters the loss never
    /// touched.
    pub fn grads_flat(&self, ids: &ParamIds, grads: &Gradients<T>) -> Vec<T> {
        let mut out = Vec::with_capacity(self.flat_len());
        for (i, (_, t)) in self.entries.iter().enumerate() {
            out.extend_from_slice(grads.get_or_zeros(ids.ids[i], t.shape()).data());
        }
        out
    }

    pub fn cast<U: Real>(&self) -> ParamSet<U> {
        ParamSet {
            entries: self
                .entries
                .iter()
                .map(|(n, t)| (n.clone(), t.cast()))
                .collect(),
        }
    }
}

impl ParamSet<f32> {
    pub fn save(&self, path: &Path, meta: &serde_json::Value) -> std::io::Result<()> {
        let refs: Vec<(String, &Tensor<f32>)> = self
            .entries
            .iter()
            .map(|(n, t)| (n.clone(), t))
            .collect();
        container::write_container(path, &refs, meta)
    }

    pub fn load(path: &Path) -> std::io::Result<(Self, serde_json::Value)> {
        let (entries, meta) = container::read_container(path)?;
        Ok((Self { entries }, meta))
    }
}

/// Tape handles for a loaded parameter set, addressable by name.
pub struct ParamIds {
    ids: Vec<TensorId>,
    index: HashMap<String, usize>,
}

impl ParamIds {
    /// Assemble from externally created leaves (gradient checking).
    pub fn from_leaves(names: &[String], ids: Vec<TensorId>) -> Self {
        assert_eq!(names.len(), ids.len());
        let index = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
        Self { ids, index }
    }

    pub fn get(&self, name: &str) -> TensorId {
        self.ids[*self
            .index
            .get(name)
            .unwrap_or_else(|| panic!("missing parameter {name}"))]
    }

    pub fn ids(&self) -> &[TensorId] {
        &self.ids
    }
}
