use std::collections::BTreeMap;

use super::params::ParamStore;

/// AdamW with bias-corrected moments and decoupled weight decay.
#[derive(Debug, Clone)]
pub struct AdamW {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    step: u64,
    moments: BTreeMap<String, (Vec<f64>, Vec<f64>)>,
}

impl AdamW {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        AdamW {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            step: 0,
            moments: BTreeMap::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Update every trainable parameter from its accumulated gradient.
    pub fn step(&mut self, store: &mut ParamStore) {
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for p in store.iter_mut().filter(|p| p.trainable) {
            let n = p.value.len();
            let (m, v) = self
                .moments
                .entry(p.name.clone())
                .or_insert_with(|| (vec![0.0; n], vec![0.0; n]));
            let grad = p.grad.data();
            let value = p.value.data_mut();
            for i in 0..n {
                let g = grad[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g * g;
                let update = (m[i] / c1) / ((v[i] / c2).sqrt() + self.eps) + self.weight_decay * value[i];
                value[i] -= self.lr * update;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Tensor;

    #[test]
    fn first_step_moves_by_lr() {
        let mut store = ParamStore::new();
        store.insert("w", Tensor::vector(&[1.0, -1.0]));
        store.add_grad("w", &Tensor::vector(&[0.5, -3.0]));
        let mut opt = AdamW::new(0.1, 0.0);
        opt.step(&mut store);
        // bias-corrected first step is lr * sign(g)
        let w = store.get("w").unwrap().data();
        assert!((w[0] - 0.9).abs() < 1e-6 && (w[1] + 0.9).abs() < 1e-6, "{w:?}");
    }

    #[test]
    fn decay_is_decoupled() {
        let mut store = ParamStore::new();
        store.insert("w", Tensor::vector(&[2.0]));
        let mut opt = AdamW::new(0.1, 0.5);
        opt.step(&mut store);
        // zero gradient: only the decay term acts
        assert!((store.get("w").unwrap().data()[0] - (2.0 - 0.1 * 0.5 * 2.0)).abs() < 1e-12);
    }

    #[test]
    fn zero_lr_is_bit_identical() {
        let mut store = ParamStore::new();
        store.insert("w", Tensor::vector(&[0.1, -0.0, 3.7e-5]));
        store.add_grad("w", &Tensor::vector(&[1.0, 2.0, -3.0]));
        let before = store.clone();
        AdamW::new(0.0, 0.01).step(&mut store);
        let bits = |s: &ParamStore| s.get("w").unwrap().data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&store), bits(&before));
    }

    #[test]
    fn frozen_parameters_do_not_move() {
        let mut store = ParamStore::new();
        store.insert("enc.w", Tensor::vector(&[1.0]));
        store.insert("head.w", Tensor::vector(&[1.0]));
        store.set_trainable(&["head."]);
        store.add_grad("enc.w", &Tensor::vector(&[1.0]));
        store.add_grad("head.w", &Tensor::vector(&[1.0]));
        AdamW::new(0.1, 0.0).step(&mut store);
        assert_eq!(store.get("enc.w").unwrap().data(), &[1.0]);
        assert!(store.get("head.w").unwrap().data()[0] < 1.0);
    }
}
