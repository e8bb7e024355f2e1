use crate::params::ParamStore;
use crate::real::Real;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First and second moment estimates for one parameter group.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentState<F> {
    pub name: String,
    pub m: Vec<Tensor<F>>,
    pub v: Vec<Tensor<F>>,
}

/// Adam with named parameter groups sharing one step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<F> {
    pub config: AdamConfig,
    step: u64,
    groups: Vec<MomentState<F>>,
}

impl<F: Real> Adam<F> {
    pub fn new(config: AdamConfig) -> Self {
        Adam { config, step: 0, groups: Vec::new() }
    }

    /// Register a group shaped like `store`; returns its index.
    pub fn add_group(&mut self, name: impl Into<String>, store: &ParamStore<F>) -> usize {
        let zeros: Vec<_> = store.values().iter().map(|t| Tensor::zeros(t.shape())).collect();
        self.groups.push(MomentState { name: name.into(), m: zeros.clone(), v: zeros });
        self.groups.len() - 1
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn groups(&self) -> &[MomentState<F>] {
        &self.groups
    }

    pub fn group_mut(&mut self, index: usize) -> &mut MomentState<F> {
        &mut self.groups[index]
    }

    pub fn set_steps_taken(&mut self, step: u64) {
        self.step = step;
    }

    /// One update of every group; `updates[i]` pairs group `i` with its
    /// parameters and gradients.
    pub fn step(&mut self, updates: &mut [(&mut ParamStore<F>, &[Tensor<F>])]) {
        assert_eq!(updates.len(), self.groups.len(), "one update per parameter group");
        self.step += 1;
        let c = self.config;
        let t = self.step as i32;
        let bc1 = 1.0 - c.beta1.powi(t);
        let bc2 = 1.0 - c.beta2.powi(t);
        let (b1, b2) = (F::lit(c.beta1), F::lit(c.beta2));
        let (one_b1, one_b2) = (F::lit(1.0 - c.beta1), F::lit(1.0 - c.beta2));
        let step_size = F::lit(c.lr / bc1);
        let inv_bc2 = F::lit(1.0 / bc2);
        let eps = F::lit(c.eps);
        for ((store, grads), group) in updates.iter_mut().zip(&mut self.groups) {
            assert_eq!(store.len(), grads.len(), "gradient count for group {}", group.name);
            for (i, value) in store.values_mut().iter_mut().enumerate() {
                let g = grads[i].data();
                let m = group.m[i].data_mut();
                let v = group.v[i].data_mut();
                for (((p, &g), m), v) in value.data_mut().iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                    *m = b1 * *m + one_b1 * g;
                    *v = b2 * *v + one_b2 * g * g;
                    *p -= step_size * *m / ((*v * inv_bc2).sqrt() + eps);
                }
            }
        }
    }
}
