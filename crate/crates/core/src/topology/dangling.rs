use std::collections::BTreeSet;

use crate::network::Network;

/// Neurons that lie on no input-to-output path, and the links touching them.
///
/// Neuron coordinates are `(level, index)`: level 0 is the input layer and
/// level `l + 1` is the output side of sparse layer `l`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Disconnected {
    pub neurons: BTreeSet<(usize, usize)>,
    /// Per sparse layer, the slots of links incident to a flagged neuron.
    pub slots: Vec<Vec<usize>>,
}

impl Disconnected {
    pub fn is_empty(&self) -> bool {
        self.neurons.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.slots.iter().map(Vec::len).sum()
    }
}

/// Flag every neuron that is unreachable from the input layer or cannot
/// reach the readout. Every last-hidden neuron reaches the readout through
/// the dense layer.
pub fn find_disconnected(net: &Network) -> Disconnected {
    let layers = net.layers();
    let mut forward: Vec<Vec<bool>> = vec![vec![true; net.input_size()]];
    for layer in layers {
        let prev = forward.last().expect("input level");
        let mut reach = vec![false; layer.out_size()];
        for e in layer.edges() {
            if prev[e.input] {
                reach[e.output] = true;
            }
        }
        forward.push(reach);
    }
    let mut backward: Vec<Vec<bool>> = vec![Vec::new(); layers.len() + 1];
    backward[layers.len()] = vec![true; layers[layers.len() - 1].out_size()];
    for (l, layer) in layers.iter().enumerate().rev() {
        let mut reach = vec![false; layer.in_size()];
        for e in layer.edges() {
            if backward[l + 1][e.output] {
                reach[e.input] = true;
            }
        }
        backward[l] = reach;
    }
    let flagged: Vec<Vec<bool>> =
        forward.iter().zip(&backward).map(|(f, b)| f.iter().zip(b).map(|(&x, &y)| !(x && y)).collect()).collect();
    let neurons = flagged
        .iter()
        .enumerate()
        .flat_map(|(lvl, v)| v.iter().enumerate().filter(|(_, &f)| f).map(move |(i, _)| (lvl, i)))
        .collect();
    let slots = layers
        .iter()
        .enumerate()
        .map(|(l, layer)| {
            layer
                .edges()
                .enumerate()
                .filter(|(_, e)| flagged[l][e.input] || flagged[l + 1][e.output])
                .map(|(k, _)| k)
                .collect()
        })
        .collect();
    Disconnected { neurons, slots }
}

/// Remove all links of disconnected neurons. Returns the removed count per
/// sparse layer. One pass suffices: links between two surviving neurons
/// always lie on an input-to-output path.
pub fn remove_disconnected(net: &mut Network) -> Vec<usize> {
    let found = find_disconnected(net);
    net.layers_mut().iter_mut().zip(&found.slots).map(|(layer, slots)| layer.remove_slots(slots)).collect()
}
