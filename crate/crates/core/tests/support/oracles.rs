//! Brute-force reference implementations shared by the integration and
//! acceptance tests. Nothing here calls into the code paths it checks.
#![allow(dead_code)]

use std::collections::{BTreeSet, VecDeque};

use rand::Rng;
use sparselab_core::network::{DenseReadout, Network, SparseLayer};

/// Dense adjacency matrix of a layer, `adj[input][output]`.
pub fn adjacency(layer: &SparseLayer) -> Vec<Vec<bool>> {
    let mut adj = vec![vec![false; layer.out_size()]; layer.in_size()];
    for e in layer.edges() {
        adj[e.input][e.output] = true;
    }
    adj
}

/// All L3 paths `u → i ← j → v` as `(i, j)` pairs, by exhaustive search.
pub fn l3_paths(adj: &[Vec<bool>], u: usize, v: usize) -> Vec<(usize, usize)> {
    let n_in = adj.len();
    let n_out = adj[0].len();
    let mut paths = Vec::new();
    for i in 0..n_out {
        for j in 0..n_in {
            if j != u && adj[u][i] && adj[j][i] && adj[j][v] {
                paths.push((i, j));
            }
        }
    }
    paths
}

pub fn l3_count(adj: &[Vec<bool>], u: usize, v: usize) -> f64 {
    l3_paths(adj, u, v).len() as f64
}

/// CH3-L3 with the local community computed from scratch.
pub fn ch3l3(adj: &[Vec<bool>], u: usize, v: usize) -> f64 {
    let n_in = adj.len();
    let n_out = adj[0].len();
    let paths = l3_paths(adj, u, v);
    let mut community_in: BTreeSet<usize> = BTreeSet::from([u]);
    let mut community_out: BTreeSet<usize> = BTreeSet::from([v]);
    for &(i, j) in &paths {
        community_out.insert(i);
        community_in.insert(j);
    }
    let external_of_output = |i: usize| {
        (0..n_in).filter(|&x| adj[x][i]).count() - (0..n_in).filter(|&x| adj[x][i] && community_in.contains(&x)).count()
    };
    let external_of_input = |j: usize| {
        (0..n_out).filter(|&y| adj[j][y]).count()
            - (0..n_out).filter(|&y| adj[j][y] && community_out.contains(&y)).count()
    };
    paths.iter().map(|&(i, j)| 1.0 / (((1 + external_of_output(i)) * (1 + external_of_input(j))) as f64).sqrt()).sum()
}

/// Every non-edge of the layer.
pub fn non_edges(adj: &[Vec<bool>]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (u, row) in adj.iter().enumerate() {
        for (v, &a) in row.iter().enumerate() {
            if !a {
                out.push((u, v));
            }
        }
    }
    out
}

/// Random bipartite layer with each link present with probability `p`.
pub fn random_layer<R: Rng>(rng: &mut R, n_in: usize, n_out: usize, p: f64) -> SparseLayer {
    let mut edges = Vec::new();
    for i in 0..n_in {
        for o in 0..n_out {
            if rng.gen::<f64>() < p {
                edges.push((i, o, rng.gen_range(-1.0..1.0)));
            }
        }
    }
    SparseLayer::from_edges(n_in, n_out, edges, vec![0.0; n_out]).unwrap()
}

/// Disconnected neurons by breadth-first search over an explicit graph with
/// a virtual source feeding all inputs and a virtual sink fed by every
/// last-hidden neuron.
pub fn disconnected_by_bfs(net: &Network) -> BTreeSet<(usize, usize)> {
    let sizes: Vec<usize> =
        std::iter::once(net.input_size()).chain(net.layers().iter().map(|l| l.out_size())).collect();
    let mut offset = vec![0usize];
    for s in &sizes {
        offset.push(offset.last().unwrap() + s);
    }
    let n = *offset.last().unwrap();
    let (source, sink) = (n, n + 1);
    let mut succ = vec![Vec::new(); n + 2];
    let mut pred = vec![Vec::new(); n + 2];
    let mut link = |a: usize, b: usize| {
        succ[a].push(b);
        pred[b].push(a);
    };
    for i in 0..sizes[0] {
        link(source, i);
    }
    for (l, layer) in net.layers().iter().enumerate() {
        for e in layer.edges() {
            link(offset[l] + e.input, offset[l + 1] + e.output);
        }
    }
    let last = sizes.len() - 1;
    for i in 0..sizes[last] {
        link(offset[last] + i, sink);
    }
    let bfs = |start: usize, next: &Vec<Vec<usize>>| {
        let mut seen = vec![false; n + 2];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(x) = queue.pop_front() {
            for &y in &next[x] {
                if !seen[y] {
                    seen[y] = true;
                    queue.push_back(y);
                }
            }
        }
        seen
    };
    let from_source = bfs(source, &succ);
    let to_sink = bfs(sink, &pred);
    let mut flagged = BTreeSet::new();
    for (lvl, &s) in sizes.iter().enumerate() {
        for i in 0..s {
            let id = offset[lvl] + i;
            if !(from_source[id] && to_sink[id]) {
                flagged.insert((lvl, i));
            }
        }
    }
    flagged
}

/// Mean softmax cross-entropy computed sample by sample from the edge list.
pub fn naive_loss(net: &Network, inputs: &[Vec<f64>], labels: &[usize]) -> f64 {
    let mut total = 0.0;
    for (x, &y) in inputs.iter().zip(labels) {
        let mut h = x.clone();
        for layer in net.layers() {
            let mut z = layer.bias().to_vec();
            for e in layer.edges() {
                z[e.output] += e.weight * h[e.input];
            }
            h = z.into_iter().map(|v| if v > 0.0 { v } else { 0.0 }).collect();
        }
        let r: &DenseReadout = net.readout();
        let logits: Vec<f64> = (0..r.out_size())
            .map(|c| r.bias()[c] + (0..r.in_size()).map(|k| r.weight(c, k) * h[k]).sum::<f64>())
            .collect();
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let log_sum = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
        total += log_sum - logits[y];
    }
    total / inputs.len() as f64
}

/// Relative error with an absolute floor for gradients that vanish.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Smallest |pre-activation| over all hidden neurons and samples; central
/// differences are only meaningful away from the rectifier's kink.
pub fn min_abs_preactivation(net: &Network, inputs: &[Vec<f64>]) -> f64 {
    let mut min = f64::INFINITY;
    for x in inputs {
        let mut h = x.clone();
        for layer in net.layers() {
            let mut z = layer.bias().to_vec();
            for e in layer.edges() {
                z[e.output] += e.weight * h[e.input];
            }
            for &v in &z {
                min = min.min(v.abs());
            }
            h = z.into_iter().map(|v| v.max(0.0)).collect();
        }
    }
    min
}

/// Central finite-difference check of every parameter. Returns the worst
/// relative error and the number of parameters checked.
pub fn finite_difference_check(
    net: &Network,
    inputs: &[Vec<f64>],
    labels: &[usize],
    analytic: &sparselab_core::network::Gradients,
    step: f64,
) -> (f64, usize) {
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    let mut probe = net.clone();
    let numeric = |probe: &mut Network, get: &dyn Fn(&mut Network) -> &mut f64| {
        let orig = *get(probe);
        *get(probe) = orig + step;
        let up = naive_loss(probe, inputs, labels);
        *get(probe) = orig - step;
        let down = naive_loss(probe, inputs, labels);
        *get(probe) = orig;
        (up - down) / (2.0 * step)
    };
    for l in 0..net.layers().len() {
        for k in 0..net.layer(l).edge_count() {
            let n = numeric(&mut probe, &|p: &mut Network| &mut p.layers_mut()[l].weights_mut()[k]);
            worst = worst.max(relative_error(analytic.layers[l].weights[k], n));
            checked += 1;
        }
        for o in 0..net.layer(l).out_size() {
            let n = numeric(&mut probe, &|p: &mut Network| &mut p.layers_mut()[l].bias_mut()[o]);
            worst = worst.max(relative_error(analytic.layers[l].bias[o], n));
            checked += 1;
        }
    }
    for k in 0..net.readout().weights().len() {
        let n = numeric(&mut probe, &|p: &mut Network| &mut p.readout_mut().weights_mut()[k]);
        worst = worst.max(relative_error(analytic.readout.weights[k], n));
        checked += 1;
    }
    for c in 0..net.class_count() {
        let n = numeric(&mut probe, &|p: &mut Network| &mut p.readout_mut().bias_mut()[c]);
        worst = worst.max(relative_error(analytic.readout.bias[c], n));
        checked += 1;
    }
    (worst, checked)
}
