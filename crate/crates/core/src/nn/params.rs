use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
    pub trainable: bool,
}

/// Named parameters, iterated in name order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    params: BTreeMap<String, Parameter>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, value: Tensor) {
        let grad = Tensor::zeros(value.shape());
        self.params.insert(
            name.to_string(),
            Parameter {
                name: name.to_string(),
                value,
                grad,
                trainable: true,
            },
        );
    }

    /// Insert a tensor with entries drawn uniformly from `(-scale, scale)`.
    pub fn insert_uniform(&mut self, name: &str, shape: &[usize], scale: f64, rng: &mut ChaCha8Rng) {
        let n = shape.iter().product();
        let data = (0..n).map(|_| rng.gen_range(-scale..scale)).collect();
        self.insert(name, Tensor::from_parts(shape.to_vec(), data));
    }

    pub fn insert_zeros(&mut self, name: &str, shape: &[usize]) {
        self.insert(name, Tensor::zeros(shape));
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.params.get(name).map(|p| &p.value)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.params.get_mut(name).map(|p| &mut p.value)
    }

    pub fn grad(&self, name: &str) -> Option<&Tensor> {
        self.params.get(name).map(|p| &p.grad)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.params.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter> {
        self.params.values()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter> {
        self.params.values_mut()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Mark exactly the parameters whose name starts with one of `prefixes`
    /// as trainable.
    pub fn set_trainable(&mut self, prefixes: &[&str]) {
        for p in self.params.values_mut() {
            p.trainable = prefixes.iter().any(|pre| p.name.starts_with(pre));
        }
    }

    pub(crate) fn add_grad(&mut self, name: &str, g: &Tensor) {
        if let Some(p) = self.params.get_mut(name) {
            if p.trainable {
                p.grad.add_assign(g);
            }
        }
    }

    /// Add another store's gradients (same parameter set) into this one.
    pub fn add_grads_from(&mut self, other: &ParamStore) {
        for (name, p) in self.params.iter_mut() {
            if let Some(o) = other.params.get(name) {
                p.grad.add_assign(&o.grad);
            }
        }
    }

    pub fn zero_grads(&mut self) {
        for p in self.params.values_mut() {
            p.grad.data_mut().iter_mut().for_each(|g| *g = 0.0);
        }
    }

    pub fn scale_grads(&mut self, c: f64) {
        for p in self.params.values_mut() {
            p.grad.data_mut().iter_mut().for_each(|g| *g *= c);
        }
    }

    /// A copy with zeroed gradients, sharing nothing with `self`.
    pub fn zeroed_grad_copy(&self) -> ParamStore {
        let mut c = self.clone();
        c.zero_grads();
        c
    }

    pub fn parameter_count(&self) -> usize {
        self.params.values().map(|p| p.value.len()).sum()
    }
}
