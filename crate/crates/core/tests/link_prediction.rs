mod support;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use sparselab_core::network::SparseLayer;
use sparselab_core::seed;
use sparselab_core::topology::{score_all, score_ch3l3, score_l3_count, Scorer};
use support::oracles;

#[test]
fn random_graphs_match_exhaustive_enumeration() {
    let mut rng = seed::rng(2024);
    for _ in 0..60 {
        let (n_in, n_out, p) = (rng.gen_range(2..=10), rng.gen_range(2..=10), rng.gen_range(0.1..0.5));
        let layer = oracles::random_layer(&mut rng, n_in, n_out, p);
        let adj = oracles::adjacency(&layer);
        let cands = oracles::non_edges(&adj);
        let ch = score_ch3l3(&layer, &cands).unwrap();
        let l3 = score_l3_count(&layer, &cands).unwrap();
        for (k, &(u, v)) in cands.iter().enumerate() {
            assert!((ch[k].score - oracles::ch3l3(&adj, u, v)).abs() <= 1e-12);
            assert_eq!(l3[k].score, oracles::l3_count(&adj, u, v));
        }
    }
}

#[test]
fn dense_layer_minus_one_edge() {
    let mut edges: Vec<(usize, usize, f64)> = (0..5).flat_map(|i| (0..5).map(move |o| (i, o, 1.0))).collect();
    edges.retain(|&(i, o, _)| (i, o) != (2, 3));
    let layer = SparseLayer::from_edges(5, 5, edges, vec![0.0; 5]).unwrap();
    let adj = oracles::adjacency(&layer);
    let s = score_l3_count(&layer, &[(2, 3)]).unwrap()[0].score;
    assert_eq!(s, oracles::l3_count(&adj, 2, 3));
    // 4 choices of i, 4 choices of j ≠ 2
    assert_eq!(s, 16.0);
    let c = score_ch3l3(&layer, &[(2, 3)]).unwrap()[0].score;
    assert!((c - oracles::ch3l3(&adj, 2, 3)).abs() < 1e-12);
}

#[test]
fn score_all_lists_exactly_the_positive_candidates() {
    let mut rng = seed::rng(5);
    for _ in 0..20 {
        let layer = oracles::random_layer(&mut rng, 9, 7, 0.25);
        let adj = oracles::adjacency(&layer);
        let expected: Vec<(usize, usize)> =
            oracles::non_edges(&adj).into_iter().filter(|&(u, v)| oracles::l3_count(&adj, u, v) > 0.0).collect();
        for scorer in [Scorer::Ch3L3, Scorer::L3Count] {
            let got: Vec<(usize, usize)> = score_all(&layer, scorer).iter().map(|c| (c.input, c.output)).collect();
            assert_eq!(got, expected);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]
    #[test]
    fn scores_are_invariant_under_relabeling(s in any::<u64>(), n_in in 2usize..9, n_out in 2usize..9, p in 0.15f64..0.6) {
        let mut rng = seed::rng(s);
        let layer = oracles::random_layer(&mut rng, n_in, n_out, p);
        let mut pin: Vec<usize> = (0..n_in).collect();
        let mut pout: Vec<usize> = (0..n_out).collect();
        pin.shuffle(&mut rng);
        pout.shuffle(&mut rng);
        let relabeled = SparseLayer::from_edges(
            n_in,
            n_out,
            layer.edges().map(|e| (pin[e.input], pout[e.output], e.weight)),
            vec![0.0; n_out],
        )
        .unwrap();
        let cands = oracles::non_edges(&oracles::adjacency(&layer));
        let mapped: Vec<(usize, usize)> = cands.iter().map(|&(u, v)| (pin[u], pout[v])).collect();
        for f in [score_ch3l3, score_l3_count] {
            let a = f(&layer, &cands).unwrap();
            let b = f(&relabeled, &mapped).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x.score - y.score).abs() < 1e-12);
            }
        }
    }
}
