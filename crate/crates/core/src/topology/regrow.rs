use std::collections::HashSet;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::scoring::{score_all, Scorer};
use super::TopologyError;
use crate::network::{Kaiming, SparseLayer};
use crate::seed::Rng as StdRng;

/// How removed links are replaced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regrowth {
    /// Uniformly random non-edges.
    #[serde(alias = "random")]
    Rlr,
    /// Highest CH3-L3 scores.
    Ch3l3,
    /// Highest L3 path counts.
    L3count,
}

impl Regrowth {
    pub fn as_str(self) -> &'static str {
        match self {
            Regrowth::Rlr => "rlr",
            Regrowth::Ch3l3 => "ch3l3",
            Regrowth::L3count => "l3count",
        }
    }

    fn scorer(self) -> Option<Scorer> {
        match self {
            Regrowth::Rlr => None,
            Regrowth::Ch3l3 => Some(Scorer::Ch3L3),
            Regrowth::L3count => Some(Scorer::L3Count),
        }
    }
}

impl std::fmt::Display for Regrowth {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Regrowth {
    type Err = TopologyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "rlr" | "random" => Ok(Regrowth::Rlr),
            "ch3l3" | "ch3-l3" => Ok(Regrowth::Ch3l3),
            "l3count" | "l3-count" | "l3" => Ok(Regrowth::L3count),
            _ => Err(TopologyError::UnknownStrategy(s.to_string())),
        }
    }
}

/// Up to `count` distinct non-edges of `layer` outside `exclude`, uniformly
/// at random.
fn random_non_edges(
    layer: &SparseLayer,
    count: usize,
    exclude: &HashSet<(usize, usize)>,
    rng: &mut StdRng,
) -> Vec<(usize, usize)> {
    let (n_in, n_out) = (layer.in_size(), layer.out_size());
    let occupied = layer.edge_count() + exclude.len();
    if 2 * (occupied + count) <= layer.capacity() {
        let mut picked = HashSet::with_capacity(count);
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let p = (rng.gen_range(0..n_in), rng.gen_range(0..n_out));
            if !layer.contains(p.0, p.1) && !exclude.contains(&p) && picked.insert(p) {
                out.push(p);
            }
        }
        out
    } else {
        let free: Vec<(usize, usize)> = (0..n_in)
            .flat_map(|i| (0..n_out).map(move |o| (i, o)))
            .filter(|&(i, o)| !layer.contains(i, o) && !exclude.contains(&(i, o)))
            .collect();
        let k = count.min(free.len());
        index::sample(rng, free.len(), k).into_iter().map(|x| free[x]).collect()
    }
}

/// Add `count` new links to `layer` according to `strategy`, with
/// Kaiming-normal weights for the layer's fan-in. Returns the new pairs in
/// the order they were chosen.
///
/// Scored strategies take the highest-scoring non-edges, breaking score ties
/// uniformly at random, and fill up with random non-edges when fewer than
/// `count` candidates have a positive score.
pub fn regrow(
    layer: &mut SparseLayer,
    count: usize,
    strategy: Regrowth,
    rng: &mut StdRng,
) -> Result<Vec<(usize, usize)>, TopologyError> {
    let free = layer.capacity() - layer.edge_count();
    if count > free {
        return Err(TopologyError::NotEnoughNonEdges { requested: count, available: free });
    }
    if count == 0 {
        return Ok(Vec::new());
    }
    let mut chosen: Vec<(usize, usize)> = Vec::with_capacity(count);
    if let Some(scorer) = strategy.scorer() {
        let mut scored: Vec<(f64, u64, usize, usize)> = score_all(layer, scorer)
            .into_iter()
            .filter(|c| c.score > 0.0)
            .map(|c| (c.score, rng.gen::<u64>(), c.input, c.output))
            .collect();
        let order = |a: &(f64, u64, usize, usize), b: &(f64, u64, usize, usize)| {
            b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then((a.2, a.3).cmp(&(b.2, b.3)))
        };
        if scored.len() > count {
            scored.select_nth_unstable_by(count - 1, order);
            scored.truncate(count);
        }
        scored.sort_unstable_by(order);
        chosen.extend(scored.iter().map(|c| (c.2, c.3)));
    }
    if chosen.len() < count {
        let exclude: HashSet<(usize, usize)> = chosen.iter().copied().collect();
        let extra = random_non_edges(layer, count - chosen.len(), &exclude, rng);
        chosen.extend(extra);
    }
    let init = Kaiming::new(layer.in_size()).map_err(|_| TopologyError::EmptyLayer)?;
    let new: Vec<(usize, usize, f64)> = chosen.iter().map(|&(i, o)| (i, o, init.sample(rng))).collect();
    layer.insert_edges(&new)?;
    Ok(chosen)
}
