//! Sparse feed-forward network: rectified sparse hidden layers followed by a
//! dense linear readout.

mod backprop;
mod layer;
pub mod snapshot;

use rand::seq::index;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::seed;

pub use backprop::{forward, loss_and_grad, predict, ForwardCache, Gradients, LayerGrad, ReadoutGrad};
pub use layer::{Edge, SparseLayer};

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("fan-in must be at least 1")]
    ZeroFanIn,
    #[error("density {0} outside (0, 1]")]
    InvalidDensity(f64),
    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("edge {input}→{output} is out of range")]
    EdgeOutOfRange { input: usize, output: usize },
    #[error("duplicate edge {input}→{output}")]
    DuplicateEdge { input: usize, output: usize },
    #[error("label {label} outside [0, {classes})")]
    BadLabel { label: usize, classes: usize },
    #[error("snapshot: {0}")]
    Snapshot(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Activation {
    #[default]
    Relu,
}

/// Fully connected readout layer; `weights` is `out_size × in_size`,
/// row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseReadout {
    in_size: usize,
    out_size: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl DenseReadout {
    pub fn new(in_size: usize, out_size: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self, NetworkError> {
        if weights.len() != in_size * out_size {
            return Err(NetworkError::ShapeMismatch { expected: in_size * out_size, actual: weights.len() });
        }
        if bias.len() != out_size {
            return Err(NetworkError::ShapeMismatch { expected: out_size, actual: bias.len() });
        }
        Ok(Self { in_size, out_size, weights, bias })
    }

    pub fn zeros(in_size: usize, out_size: usize) -> Self {
        Self { in_size, out_size, weights: vec![0.0; in_size * out_size], bias: vec![0.0; out_size] }
    }

    pub fn in_size(&self) -> usize {
        self.in_size
    }

    pub fn out_size(&self) -> usize {
        self.out_size
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    pub fn weight(&self, class: usize, input: usize) -> f64 {
        self.weights[class * self.in_size + input]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<SparseLayer>,
    readout: DenseReadout,
    activation: Activation,
    seed_lineage: Vec<u64>,
}

impl Network {
    pub fn new(layers: Vec<SparseLayer>, readout: DenseReadout) -> Result<Self, NetworkError> {
        if layers.is_empty() {
            return Err(NetworkError::InvalidShape("at least one sparse layer is required".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].out_size() != pair[1].in_size() {
                return Err(NetworkError::ShapeMismatch { expected: pair[0].out_size(), actual: pair[1].in_size() });
            }
        }
        let last = layers[layers.len() - 1].out_size();
        if readout.in_size() != last {
            return Err(NetworkError::ShapeMismatch { expected: last, actual: readout.in_size() });
        }
        Ok(Self { layers, readout, activation: Activation::Relu, seed_lineage: Vec::new() })
    }

    pub fn with_seed_lineage(mut self, lineage: Vec<u64>) -> Self {
        self.seed_lineage = lineage;
        self
    }

    pub fn seed_lineage(&self) -> &[u64] {
        &self.seed_lineage
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn layers(&self) -> &[SparseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [SparseLayer] {
        &mut self.layers
    }

    pub fn layer(&self, l: usize) -> &SparseLayer {
        &self.layers[l]
    }

    pub fn readout(&self) -> &DenseReadout {
        &self.readout
    }

    pub fn readout_mut(&mut self) -> &mut DenseReadout {
        &mut self.readout
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].in_size()
    }

    pub fn class_count(&self) -> usize {
        self.readout.out_size()
    }

    /// Neuron counts from the input to the readout, e.g. `[784, 1000, 1000, 1000, 10]`.
    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.input_size()];
        s.extend(self.layers.iter().map(|l| l.out_size()));
        s.push(self.class_count());
        s
    }

    pub fn edge_counts(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.edge_count()).collect()
    }

    pub fn total_edges(&self) -> usize {
        self.layers.iter().map(|l| l.edge_count()).sum()
    }
}

/// Zero-mean normal with variance `2 / fan_in`.
#[derive(Debug, Clone, Copy)]
pub struct Kaiming(Normal<f64>);

impl Kaiming {
    pub fn new(fan_in: usize) -> Result<Self, NetworkError> {
        if fan_in == 0 {
            return Err(NetworkError::ZeroFanIn);
        }
        Ok(Self(Normal::new(0.0, Self::std_dev(fan_in)).expect("finite standard deviation")))
    }

    pub fn std_dev(fan_in: usize) -> f64 {
        (2.0 / fan_in as f64).sqrt()
    }

    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.0.sample(rng)
    }
}

/// One Kaiming-normal draw for a neuron with `fan_in` possible inputs.
pub fn kaiming_sample<R: rand::Rng + ?Sized>(fan_in: usize, rng: &mut R) -> Result<f64, NetworkError> {
    Ok(Kaiming::new(fan_in)?.sample(rng))
}

/// Random sparse network.
///
/// `sizes` lists the input size followed by the hidden widths. Each sparse
/// layer receives `round(density × in × out)` distinct links placed
/// uniformly at random, Kaiming-normal weights and zero biases. The dense
/// readout is Kaiming-initialized as well.
pub fn init_network(sizes: &[usize], class_count: usize, density: f64, seed: u64) -> Result<Network, NetworkError> {
    if !(density > 0.0 && density <= 1.0) {
        return Err(NetworkError::InvalidDensity(density));
    }
    if sizes.len() < 2 || sizes.contains(&0) || class_count == 0 {
        return Err(NetworkError::InvalidShape(format!("sizes {sizes:?}, {class_count} classes")));
    }
    let mut layers = Vec::with_capacity(sizes.len() - 1);
    for (l, pair) in sizes.windows(2).enumerate() {
        let (n_in, n_out) = (pair[0], pair[1]);
        let mut rng = seed::rng(seed::derive_path(seed, &[seed::stream::INIT, l as u64]));
        let target = (density * (n_in * n_out) as f64).round() as usize;
        let mut picks: Vec<usize> = index::sample(&mut rng, n_in * n_out, target).into_vec();
        picks.sort_unstable();
        let init = Kaiming::new(n_in)?;
        let edges: Vec<(usize, usize, f64)> =
            picks.into_iter().map(|p| (p / n_out, p % n_out, init.sample(&mut rng))).collect();
        layers.push(SparseLayer::from_edges(n_in, n_out, edges, vec![0.0; n_out])?);
    }
    let last = sizes[sizes.len() - 1];
    let mut rng = seed::rng(seed::derive_path(seed, &[seed::stream::INIT, sizes.len() as u64]));
    let init = Kaiming::new(last)?;
    let weights = (0..last * class_count).map(|_| init.sample(&mut rng)).collect();
    let readout = DenseReadout::new(last, class_count, weights, vec![0.0; class_count])?;
    Ok(Network::new(layers, readout)?.with_seed_lineage(vec![seed]))
}
