//! First-order optimizers over the sparse parameter set.
//!
//! Per-link state is stored in slot order and has to follow the links when
//! the topology changes; see [`Optimizer::remap_layer`].

use super::config::{OptimizerConfig, OptimizerKind};
use crate::network::{Gradients, Network, SparseLayer};

#[derive(Debug, Clone, Default)]
struct Moments {
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Moments {
    fn zeros(n: usize) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n] }
    }
}

#[derive(Debug, Clone)]
pub struct Optimizer {
    config: OptimizerConfig,
    steps: u64,
    weights: Vec<Moments>,
    biases: Vec<Moments>,
    readout_weights: Moments,
    readout_bias: Moments,
}

impl Optimizer {
    pub fn new(config: &OptimizerConfig, net: &Network) -> Self {
        Self {
            config: config.clone(),
            steps: 0,
            weights: net.layers().iter().map(|l| Moments::zeros(l.edge_count())).collect(),
            biases: net.layers().iter().map(|l| Moments::zeros(l.out_size())).collect(),
            readout_weights: Moments::zeros(net.readout().weights().len()),
            readout_bias: Moments::zeros(net.class_count()),
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// First and second moments of the links of layer `l`, in slot order.
    pub fn link_moments(&self, l: usize) -> (&[f64], &[f64]) {
        (&self.weights[l].m, &self.weights[l].v)
    }

    pub fn step(&mut self, net: &mut Network, grads: &Gradients) {
        self.steps += 1;
        let c = &self.config;
        let t = self.steps as i32;
        for (l, layer) in net.layers_mut().iter_mut().enumerate() {
            apply(c, t, layer.weights_mut(), &grads.layers[l].weights, &mut self.weights[l]);
            apply(c, t, layer.bias_mut(), &grads.layers[l].bias, &mut self.biases[l]);
        }
        let r = net.readout_mut();
        apply(c, t, r.weights_mut(), &grads.readout.weights, &mut self.readout_weights);
        apply(c, t, r.bias_mut(), &grads.readout.bias, &mut self.readout_bias);
    }

    /// Carry link state of layer `l` from `old` to `new`: surviving links
    /// keep their moments, new links start from zero.
    pub fn remap_layer(&mut self, l: usize, old: &SparseLayer, new: &SparseLayer) {
        let prev = std::mem::take(&mut self.weights[l]);
        let mut next = Moments::zeros(new.edge_count());
        let inputs = new.inputs();
        for o in 0..new.out_size() {
            for k in new.row_range(o) {
                if let Some(j) = old.slot(inputs[k] as usize, o) {
                    next.m[k] = prev.m[j];
                    next.v[k] = prev.v[j];
                }
            }
        }
        self.weights[l] = next;
    }
}

fn apply(c: &OptimizerConfig, t: i32, params: &mut [f64], grads: &[f64], s: &mut Moments) {
    debug_assert_eq!(params.len(), grads.len());
    match c.kind {
        OptimizerKind::Adam => {
            let correct1 = 1.0 - c.beta1.powi(t);
            let correct2 = 1.0 - c.beta2.powi(t);
            for (k, p) in params.iter_mut().enumerate() {
                let g = grads[k] + c.weight_decay * *p;
                s.m[k] = c.beta1 * s.m[k] + (1.0 - c.beta1) * g;
                s.v[k] = c.beta2 * s.v[k] + (1.0 - c.beta2) * g * g;
                let m_hat = s.m[k] / correct1;
                let v_hat = s.v[k] / correct2;
                *p -= c.learning_rate * m_hat / (v_hat.sqrt() + c.epsilon);
            }
        }
        OptimizerKind::Sgd => {
            for (k, p) in params.iter_mut().enumerate() {
                let g = grads[k] + c.weight_decay * *p;
                s.m[k] = c.momentum * s.m[k] + g;
                *p -= c.learning_rate * s.m[k];
            }
        }
    }
}
