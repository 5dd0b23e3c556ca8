//! Post-training perturbations of the sparse layers. The dense readout is
//! never touched.

use rand::seq::{index, SliceRandom};
use rand_distr::{Distribution, Normal};

use super::RobustnessError;
use crate::network::{Network, SparseLayer};
use crate::seed::Rng;
use crate::topology::{fraction_of, magnitude_ranking, MagnitudeOrder};

fn check_fraction(name: &'static str, p: f64) -> Result<(), RobustnessError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(RobustnessError::IntensityOutOfRange { kind: name, value: p })
    }
}

/// Remove `count` uniformly chosen links.
pub(crate) fn remove_random(layer: &mut SparseLayer, count: usize, rng: &mut Rng) {
    let mut slots = index::sample(rng, layer.edge_count(), count).into_vec();
    slots.sort_unstable();
    layer.remove_slots(&slots);
}

/// Remove the first `count` links of the magnitude ranking `order`.
pub(crate) fn remove_ranked(layer: &mut SparseLayer, count: usize, order: MagnitudeOrder) {
    let mut slots = magnitude_ranking(layer, order);
    slots.truncate(count);
    slots.sort_unstable();
    layer.remove_slots(&slots);
}

/// In every sparse layer remove floor(p·E) links chosen uniformly.
pub fn random_prune(net: &mut Network, p: f64, rng: &mut Rng) -> Result<(), RobustnessError> {
    check_fraction("random-prune", p)?;
    for layer in net.layers_mut() {
        let k = fraction_of(p, layer.edge_count());
        remove_random(layer, k, rng);
    }
    Ok(())
}

/// In every sparse layer remove the floor(p·E) strongest links.
pub fn weight_order_prune(net: &mut Network, p: f64) -> Result<(), RobustnessError> {
    check_fraction("weight-order-prune", p)?;
    for layer in net.layers_mut() {
        let k = fraction_of(p, layer.edge_count());
        remove_ranked(layer, k, MagnitudeOrder::Strongest);
    }
    Ok(())
}

/// In every sparse layer remove the floor(p·E) weakest links.
pub fn reverse_weight_order_prune(net: &mut Network, p: f64) -> Result<(), RobustnessError> {
    check_fraction("reverse-weight-order-prune", p)?;
    for layer in net.layers_mut() {
        let k = fraction_of(p, layer.edge_count());
        remove_ranked(layer, k, MagnitudeOrder::Weakest);
    }
    Ok(())
}

/// Permute weight values within bins of width `r·(max − min)` over each
/// layer's signed weights. `r = 0` is the identity.
///
/// Layers whose weights are all equal are left alone; if that holds for
/// every non-empty layer the call fails with `DegenerateRange`.
pub fn weight_shuffle(net: &mut Network, r: f64, rng: &mut Rng) -> Result<(), RobustnessError> {
    check_fraction("weight-shuffle", r)?;
    if r == 0.0 {
        return Ok(());
    }
    let mut shuffled_any = false;
    let mut non_empty = false;
    for layer in net.layers_mut() {
        let w = layer.weights_mut();
        if w.is_empty() {
            continue;
        }
        non_empty = true;
        let (lo, hi) = w.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        if !(hi > lo) {
            continue;
        }
        shuffled_any = true;
        let width = r * (hi - lo);
        let bins = ((1.0 / r) - 1e-12).ceil().max(1.0) as usize;
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); bins];
        for (k, &x) in w.iter().enumerate() {
            let b = (((x - lo) / width).floor() as usize).min(bins - 1);
            members[b].push(k);
        }
        for slots in members.iter().filter(|s| s.len() > 1) {
            let mut values: Vec<f64> = slots.iter().map(|&k| w[k]).collect();
            values.shuffle(rng);
            for (&k, v) in slots.iter().zip(values) {
                w[k] = v;
            }
        }
    }
    if non_empty && !shuffled_any {
        return Err(RobustnessError::DegenerateRange);
    }
    Ok(())
}

/// Add N(0, (w̄·m)²) noise to every link, w̄ being the layer's mean |w|.
pub fn weight_modify(net: &mut Network, m: f64, rng: &mut Rng) -> Result<(), RobustnessError> {
    if !(m >= 0.0 && m.is_finite()) {
        return Err(RobustnessError::IntensityOutOfRange { kind: "weight-modify", value: m });
    }
    for layer in net.layers_mut() {
        let w = layer.weights_mut();
        if w.is_empty() {
            continue;
        }
        let sigma = mean_magnitude(w) * m;
        if sigma == 0.0 {
            continue;
        }
        let noise = Normal::new(0.0, sigma).expect("finite positive sigma");
        for x in w.iter_mut() {
            *x += noise.sample(rng);
        }
    }
    Ok(())
}

pub fn mean_magnitude(weights: &[f64]) -> f64 {
    if weights.is_empty() {
        return 0.0;
    }
    weights.iter().map(|w| w.abs()).sum::<f64>() / weights.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{init_network, DenseReadout};
    use crate::seed;

    fn three() -> Network {
        let layer = SparseLayer::from_edges(2, 2, [(0, 0, 0.9), (0, 1, -0.5), (1, 1, 0.2)], vec![0.0; 2]).unwrap();
        Network::new(vec![layer], DenseReadout::zeros(2, 2)).unwrap()
    }

    fn weights(net: &Network) -> Vec<f64> {
        net.layer(0).weights().to_vec()
    }

    #[test]
    fn order_prunes_on_small_example() {
        let mut net = three();
        weight_order_prune(&mut net, 1.0 / 3.0).unwrap();
        assert_eq!(weights(&net), vec![-0.5, 0.2]);
        let mut net = three();
        reverse_weight_order_prune(&mut net, 1.0 / 3.0).unwrap();
        assert_eq!(weights(&net), vec![0.9, -0.5]);
        assert!((mean_magnitude(&[0.9, -0.5, 0.2]) - 1.6 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn random_prune_counts_and_extremes() {
        let mut rng = seed::rng(1);
        let mut net = init_network(&[50, 40, 40], 3, 0.2, 1).unwrap();
        let before = net.edge_counts();
        random_prune(&mut net, 0.5, &mut rng).unwrap();
        for (a, b) in net.edge_counts().iter().zip(&before) {
            assert_eq!(*a, b - b / 2);
        }
        random_prune(&mut net, 1.0, &mut rng).unwrap();
        assert_eq!(net.total_edges(), 0);
        assert!(random_prune(&mut net, 1.5, &mut rng).is_err());
    }

    #[test]
    fn full_shuffle_permutes_the_layer() {
        let mut rng = seed::rng(2);
        let mut net = init_network(&[30, 30], 2, 0.5, 3).unwrap();
        let before = weights(&net);
        weight_shuffle(&mut net, 1.0, &mut rng).unwrap();
        let after = weights(&net);
        assert_ne!(before, after);
        let sort = |mut v: Vec<f64>| {
            v.sort_by(f64::total_cmp);
            v
        };
        assert_eq!(sort(before), sort(after));
    }

    #[test]
    fn tiny_bins_leave_distinct_weights_alone() {
        let mut rng = seed::rng(3);
        let mut net = three();
        weight_shuffle(&mut net, 0.01, &mut rng).unwrap();
        assert_eq!(weights(&net), vec![0.9, -0.5, 0.2]);
    }

    #[test]
    fn degenerate_range_is_reported_and_harmless() {
        let layer = SparseLayer::from_edges(2, 2, [(0, 0, 0.3), (1, 1, 0.3)], vec![0.0; 2]).unwrap();
        let mut net = Network::new(vec![layer], DenseReadout::zeros(2, 2)).unwrap();
        let before = net.clone();
        assert!(matches!(weight_shuffle(&mut net, 0.5, &mut seed::rng(0)), Err(RobustnessError::DegenerateRange)));
        assert_eq!(net, before);
    }

    #[test]
    fn modify_scales_noise_by_mean_magnitude() {
        let mut rng = seed::rng(4);
        let mut net = three();
        weight_modify(&mut net, 0.0, &mut rng).unwrap();
        assert_eq!(weights(&net), vec![0.9, -0.5, 0.2]);
        assert!(weight_modify(&mut net, -1.0, &mut rng).is_err());
    }
}
