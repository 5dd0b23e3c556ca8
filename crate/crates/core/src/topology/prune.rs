use std::cmp::Ordering;

use super::TopologyError;
use crate::network::SparseLayer;

/// Which end of the magnitude ranking is removed first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MagnitudeOrder {
    Weakest,
    Strongest,
}

/// `floor(fraction × n)`, tolerant to representation error in `fraction`
/// (0.29 × 100 must give 29, not 28).
pub fn fraction_of(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64) + 1e-9).floor().min(n as f64) as usize
}

/// Slots ordered by |weight| (ascending for `Weakest`, descending for
/// `Strongest`); equal magnitudes are ordered by (input, output).
pub fn magnitude_ranking(layer: &SparseLayer, order: MagnitudeOrder) -> Vec<usize> {
    let outputs = layer.outputs();
    let inputs = layer.inputs();
    let w = layer.weights();
    let mut slots: Vec<usize> = (0..layer.edge_count()).collect();
    slots.sort_unstable_by(|&a, &b| {
        let by_mag = w[a].abs().total_cmp(&w[b].abs());
        let by_mag = if order == MagnitudeOrder::Strongest { by_mag.reverse() } else { by_mag };
        by_mag.then_with(|| (inputs[a], outputs[a]).cmp(&(inputs[b], outputs[b]))).then(Ordering::Equal)
    });
    slots
}

/// Remove `floor(fraction × E)` links from one end of the magnitude
/// ranking. Returns the number removed.
pub fn remove_by_magnitude(
    layer: &mut SparseLayer,
    fraction: f64,
    order: MagnitudeOrder,
) -> Result<usize, TopologyError> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(TopologyError::InvalidFraction(fraction));
    }
    let n = fraction_of(fraction, layer.edge_count());
    if n == 0 {
        return Ok(0);
    }
    let ranking = magnitude_ranking(layer, order);
    Ok(layer.remove_slots(&ranking[..n]))
}

/// Magnitude pruning: drop the `floor(ζ·E)` links of smallest |weight|.
pub fn prune_weakest(layer: &mut SparseLayer, fraction: f64) -> Result<usize, TopologyError> {
    if layer.is_empty() {
        return Err(TopologyError::EmptyLayer);
    }
    remove_by_magnitude(layer, fraction, MagnitudeOrder::Weakest)
}
