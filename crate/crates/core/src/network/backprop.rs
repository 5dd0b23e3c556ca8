//! Forward pass, softmax cross-entropy and backpropagation restricted to
//! the links that exist.
//!
//! Activations are kept feature-major (`neurons × batch`) so that every
//! link contributes one contiguous multiply-add over the batch.

use ndarray::{Array2, ArrayView2};

use super::{Network, NetworkError, SparseLayer};

#[cfg(test)]
thread_local! {
    static MACS: std::cell::Cell<u64> = const { std::cell::Cell::new(0) };
}

/// Multiply-accumulates performed by sparse layers on this thread since the
/// last call (test builds only).
#[cfg(test)]
pub(super) fn mac_count() -> u64 {
    MACS.with(|c| c.replace(0))
}

/// Pre- and post-activations of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    input: Array2<f64>,
    pre: Vec<Array2<f64>>,
    post: Vec<Array2<f64>>,
    logits: Array2<f64>,
}

impl ForwardCache {
    pub fn batch_size(&self) -> usize {
        self.input.ncols()
    }

    /// Pre-activations of sparse layer `l`, `neurons × batch`.
    pub fn pre_activation(&self, l: usize) -> ArrayView2<'_, f64> {
        self.pre[l].view()
    }

    /// Post-activations of sparse layer `l`, `neurons × batch`.
    pub fn activation(&self, l: usize) -> ArrayView2<'_, f64> {
        self.post[l].view()
    }

    /// Readout outputs, `batch × classes`.
    pub fn logits(&self) -> Array2<f64> {
        self.logits.t().to_owned()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    /// One entry per link, in the layer's slot order.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutGrad {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Loss gradients. Sparse layers only carry slots for existing links.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
    pub readout: ReadoutGrad,
}

impl Gradients {
    /// Gradient of the link `input → output` of layer `l`, or `None` when the
    /// link does not exist.
    pub fn sparse_weight(&self, net: &Network, l: usize, input: usize, output: usize) -> Option<f64> {
        net.layer(l).slot(input, output).map(|k| self.layers[l].weights[k])
    }
}

fn sparse_forward(layer: &SparseLayer, x: &Array2<f64>) -> Array2<f64> {
    let batch = x.ncols();
    let mut out = Array2::zeros((layer.out_size(), batch));
    let xs = x.as_slice().expect("standard layout");
    let inputs = layer.inputs();
    let weights = layer.weights();
    for (o, mut row) in out.rows_mut().into_iter().enumerate() {
        let dst = row.as_slice_mut().expect("standard layout");
        dst.fill(layer.bias()[o]);
        for k in layer.row_range(o) {
            let w = weights[k];
            let src = &xs[inputs[k] as usize * batch..][..batch];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += w * s;
            }
        }
        #[cfg(test)]
        MACS.with(|c| c.set(c.get() + (layer.row_range(o).len() * batch) as u64));
    }
    out
}

fn readout_forward(net: &Network, h: &Array2<f64>) -> Array2<f64> {
    let r = net.readout();
    let batch = h.ncols();
    let hs = h.as_slice().expect("standard layout");
    let mut out = Array2::zeros((r.out_size(), batch));
    for (c, mut row) in out.rows_mut().into_iter().enumerate() {
        let dst = row.as_slice_mut().expect("standard layout");
        dst.fill(r.bias()[c]);
        for (k, &w) in r.weights()[c * r.in_size()..(c + 1) * r.in_size()].iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for (d, s) in dst.iter_mut().zip(&hs[k * batch..(k + 1) * batch]) {
                *d += w * s;
            }
        }
    }
    out
}

fn check_input(net: &Network, batch: &Array2<f64>) -> Result<(), NetworkError> {
    if batch.ncols() != net.input_size() {
        return Err(NetworkError::ShapeMismatch { expected: net.input_size(), actual: batch.ncols() });
    }
    Ok(())
}

/// Forward pass over a `batch × inputs` matrix. Returns `batch × classes`
/// logits and the cache needed for [`loss_and_grad`].
pub fn forward(net: &Network, batch: &Array2<f64>) -> Result<(Array2<f64>, ForwardCache), NetworkError> {
    check_input(net, batch)?;
    let input = batch.t().as_standard_layout().into_owned();
    let mut pre = Vec::with_capacity(net.layers().len());
    let mut post: Vec<Array2<f64>> = Vec::with_capacity(net.layers().len());
    for layer in net.layers() {
        let x = post.last().unwrap_or(&input);
        let z = sparse_forward(layer, x);
        post.push(z.mapv(|v| v.max(0.0)));
        pre.push(z);
    }
    let logits = readout_forward(net, post.last().expect("at least one layer"));
    let cache = ForwardCache { input, pre, post, logits };
    Ok((cache.logits(), cache))
}

/// Logits without keeping intermediate activations.
pub fn predict(net: &Network, batch: &Array2<f64>) -> Result<Array2<f64>, NetworkError> {
    check_input(net, batch)?;
    let mut h = batch.t().as_standard_layout().into_owned();
    for layer in net.layers() {
        h = sparse_forward(layer, &h);
        h.mapv_inplace(|v| v.max(0.0));
    }
    Ok(readout_forward(net, &h).t().to_owned())
}

/// Mean softmax cross-entropy of the cached logits and its gradient with
/// respect to every trainable parameter.
pub fn loss_and_grad(net: &Network, cache: &ForwardCache, labels: &[usize]) -> Result<(f64, Gradients), NetworkError> {
    let batch = cache.batch_size();
    let classes = net.class_count();
    if labels.len() != batch {
        return Err(NetworkError::ShapeMismatch { expected: batch, actual: labels.len() });
    }
    if cache.pre.len() != net.layers().len() || cache.logits.nrows() != classes {
        return Err(NetworkError::ShapeMismatch { expected: classes, actual: cache.logits.nrows() });
    }
    if let Some(&label) = labels.iter().find(|&&l| l >= classes) {
        return Err(NetworkError::BadLabel { label, classes });
    }

    // softmax per column, dL/dlogits = (p - onehot) / batch
    let mut delta = cache.logits.clone();
    let mut loss = 0.0;
    for (b, mut col) in delta.columns_mut().into_iter().enumerate() {
        let max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = col.iter().map(|&z| (z - max).exp()).sum();
        let log_z = max + sum.ln();
        loss += log_z - col[labels[b]];
        col.mapv_inplace(|z| (z - log_z).exp() / batch as f64);
        col[labels[b]] -= 1.0 / batch as f64;
    }
    loss /= batch as f64;

    let r = net.readout();
    let h = cache.post.last().expect("at least one layer");
    let hs = h.as_slice().expect("standard layout");
    let mut readout = ReadoutGrad { weights: vec![0.0; r.weights().len()], bias: vec![0.0; classes] };
    let mut dh = Array2::<f64>::zeros(h.dim());
    {
        let dhs = dh.as_slice_mut().expect("standard layout");
        for (c, row) in delta.rows().into_iter().enumerate() {
            let d = row.as_slice().expect("standard layout");
            readout.bias[c] = d.iter().sum();
            for k in 0..r.in_size() {
                let hk = &hs[k * batch..(k + 1) * batch];
                readout.weights[c * r.in_size() + k] = dot(d, hk);
                let w = r.weights()[c * r.in_size() + k];
                for (g, dv) in dhs[k * batch..(k + 1) * batch].iter_mut().zip(d) {
                    *g += w * dv;
                }
            }
        }
    }

    let mut layers = vec![LayerGrad { weights: Vec::new(), bias: Vec::new() }; net.layers().len()];
    let mut upstream = dh;
    for l in (0..net.layers().len()).rev() {
        let layer = net.layer(l);
        let x = if l == 0 { &cache.input } else { &cache.post[l - 1] };
        let xs = x.as_slice().expect("standard layout");
        let mut dz = upstream;
        for (d, &z) in dz.iter_mut().zip(cache.pre[l].iter()) {
            if z <= 0.0 {
                *d = 0.0;
            }
        }
        let dzs = dz.as_slice().expect("standard layout");
        let mut grad = LayerGrad { weights: vec![0.0; layer.edge_count()], bias: vec![0.0; layer.out_size()] };
        let mut dx = if l > 0 { Some(Array2::<f64>::zeros(x.dim())) } else { None };
        for o in 0..layer.out_size() {
            let d = &dzs[o * batch..(o + 1) * batch];
            grad.bias[o] = d.iter().sum();
            for k in layer.row_range(o) {
                let i = layer.inputs()[k] as usize;
                grad.weights[k] = dot(d, &xs[i * batch..(i + 1) * batch]);
                if let Some(dx) = dx.as_mut() {
                    let w = layer.weights()[k];
                    let dxs = dx.as_slice_mut().expect("standard layout");
                    for (g, dv) in dxs[i * batch..(i + 1) * batch].iter_mut().zip(d) {
                        *g += w * dv;
                    }
                }
            }
        }
        layers[l] = grad;
        match dx {
            Some(dx) => upstream = dx,
            None => break,
        }
    }
    Ok((loss, Gradients { layers, readout }))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{init_network, DenseReadout};
    use crate::seed;
    use ndarray::array;
    use rand::Rng;

    fn single_edge(weight: f64) -> Network {
        let layer = SparseLayer::from_edges(1, 1, vec![(0, 0, weight)], vec![0.0]).unwrap();
        Network::new(vec![layer], DenseReadout::new(1, 1, vec![1.0], vec![0.0]).unwrap()).unwrap()
    }

    #[test]
    fn rectified_single_edge() {
        let net = single_edge(2.0);
        let (logits, cache) = forward(&net, &array![[3.0]]).unwrap();
        assert_eq!(cache.pre_activation(0)[[0, 0]], 6.0);
        assert_eq!(cache.activation(0)[[0, 0]], 6.0);
        assert_eq!(logits[[0, 0]], 6.0);
        let (_, cache) = forward(&net, &array![[-3.0]]).unwrap();
        assert_eq!(cache.pre_activation(0)[[0, 0]], -6.0);
        assert_eq!(cache.activation(0)[[0, 0]], 0.0);
    }

    #[test]
    fn zero_network_gives_zero_logits_and_uniform_loss() {
        let mut net = init_network(&[20, 8, 8], 10, 0.5, 1).unwrap();
        for l in net.layers_mut() {
            l.weights_mut().fill(0.0);
        }
        net.readout_mut().weights_mut().fill(0.0);
        let mut rng = seed::rng(2);
        let batch = Array2::from_shape_fn((5, 20), |_| rng.gen_range(-1.0..1.0));
        let (logits, cache) = forward(&net, &batch).unwrap();
        assert!(logits.iter().all(|&z| z == 0.0));
        let (loss, _) = loss_and_grad(&net, &cache, &[0, 3, 9, 2, 2]).unwrap();
        approx::assert_abs_diff_eq!(loss, 10f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn shape_errors() {
        let net = init_network(&[6, 4], 3, 0.5, 0).unwrap();
        assert!(matches!(forward(&net, &Array2::zeros((2, 5))), Err(NetworkError::ShapeMismatch { .. })));
        let (_, cache) = forward(&net, &Array2::zeros((2, 6))).unwrap();
        assert!(matches!(loss_and_grad(&net, &cache, &[0]), Err(NetworkError::ShapeMismatch { .. })));
        assert!(matches!(loss_and_grad(&net, &cache, &[0, 3]), Err(NetworkError::BadLabel { .. })));
    }

    #[test]
    fn predict_matches_forward() {
        let net = init_network(&[12, 9, 7], 4, 0.4, 5).unwrap();
        let mut rng = seed::rng(6);
        let batch = Array2::from_shape_fn((3, 12), |_| rng.gen::<f64>());
        let (a, _) = forward(&net, &batch).unwrap();
        assert_eq!(a, predict(&net, &batch).unwrap());
    }

    #[test]
    fn forward_touches_each_edge_once_per_sample() {
        let net = init_network(&[30, 20, 20, 10], 4, 0.2, 8).unwrap();
        mac_count();
        predict(&net, &Array2::zeros((7, 30))).unwrap();
        assert_eq!(mac_count(), 7 * net.total_edges() as u64);
    }

    #[test]
    fn absent_links_have_no_gradient_slot() {
        let net = init_network(&[6, 4, 4, 4], 3, 0.4, 2).unwrap();
        let (_, cache) = forward(&net, &Array2::from_elem((2, 6), 0.5)).unwrap();
        let (_, g) = loss_and_grad(&net, &cache, &[0, 1]).unwrap();
        for (l, layer) in net.layers().iter().enumerate() {
            assert_eq!(g.layers[l].weights.len(), layer.edge_count());
            for i in 0..layer.in_size() {
                for o in 0..layer.out_size() {
                    assert_eq!(g.sparse_weight(&net, l, i, o).is_some(), layer.contains(i, o));
                }
            }
        }
    }

    #[test]
    fn loss_is_equivariant_under_class_permutation() {
        let net = init_network(&[6, 5], 4, 0.6, 4).unwrap();
        let mut rng = seed::rng(1);
        let batch = Array2::from_shape_fn((3, 6), |_| rng.gen_range(-1.0..1.0));
        let labels = [0, 2, 3];
        let (_, cache) = forward(&net, &batch).unwrap();
        let (loss, _) = loss_and_grad(&net, &cache, &labels).unwrap();

        let perm = [2, 0, 3, 1];
        let r = net.readout();
        let mut w = vec![0.0; r.weights().len()];
        let mut b = vec![0.0; 4];
        for c in 0..4 {
            b[perm[c]] = r.bias()[c];
            for k in 0..r.in_size() {
                w[perm[c] * r.in_size() + k] = r.weight(c, k);
            }
        }
        let permuted = Network::new(net.layers().to_vec(), DenseReadout::new(r.in_size(), 4, w, b).unwrap()).unwrap();
        let (_, cache) = forward(&permuted, &batch).unwrap();
        let plabels: Vec<usize> = labels.iter().map(|&l| perm[l]).collect();
        let (ploss, _) = loss_and_grad(&permuted, &cache, &plabels).unwrap();
        approx::assert_abs_diff_eq!(loss, ploss, epsilon = 1e-12);
    }
}
