use super::NetworkError;

/// One link of a sparse layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub input: usize,
    pub output: usize,
    pub weight: f64,
}

/// Weighted bipartite edge set between two neuron layers, plus the biases of
/// the output neurons.
///
/// Edges are grouped by output neuron (compressed rows over `output`), and
/// sorted by input index within a row. The position of an edge in this
/// order is its *slot*; gradients and optimizer state are stored per slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseLayer {
    in_size: usize,
    out_size: usize,
    row_ptr: Vec<usize>,
    inputs: Vec<u32>,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl SparseLayer {
    /// A layer without links and zero biases.
    pub fn empty(in_size: usize, out_size: usize) -> Self {
        Self {
            in_size,
            out_size,
            row_ptr: vec![0; out_size + 1],
            inputs: Vec::new(),
            weights: Vec::new(),
            bias: vec![0.0; out_size],
        }
    }

    /// Build a layer from `(input, output, weight)` triples. Duplicate pairs
    /// and out-of-range indices are rejected.
    pub fn from_edges<I>(in_size: usize, out_size: usize, edges: I, bias: Vec<f64>) -> Result<Self, NetworkError>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        if in_size == 0 || out_size == 0 || in_size > u32::MAX as usize {
            return Err(NetworkError::InvalidShape(format!("layer {in_size}×{out_size}")));
        }
        if bias.len() != out_size {
            return Err(NetworkError::ShapeMismatch { expected: out_size, actual: bias.len() });
        }
        let mut list: Vec<(usize, usize, f64)> = edges.into_iter().collect();
        for &(i, o, _) in &list {
            if i >= in_size || o >= out_size {
                return Err(NetworkError::EdgeOutOfRange { input: i, output: o });
            }
        }
        list.sort_unstable_by_key(|&(i, o, _)| (o, i));
        if let Some(w) = list.windows(2).find(|w| w[0].0 == w[1].0 && w[0].1 == w[1].1) {
            return Err(NetworkError::DuplicateEdge { input: w[0].0, output: w[0].1 });
        }
        let mut row_ptr = vec![0usize; out_size + 1];
        for &(_, o, _) in &list {
            row_ptr[o + 1] += 1;
        }
        for k in 0..out_size {
            row_ptr[k + 1] += row_ptr[k];
        }
        Ok(Self {
            in_size,
            out_size,
            row_ptr,
            inputs: list.iter().map(|&(i, _, _)| i as u32).collect(),
            weights: list.iter().map(|&(_, _, w)| w).collect(),
            bias,
        })
    }

    pub fn in_size(&self) -> usize {
        self.in_size
    }

    pub fn out_size(&self) -> usize {
        self.out_size
    }

    pub fn edge_count(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Number of possible links, `in_size × out_size`.
    pub fn capacity(&self) -> usize {
        self.in_size * self.out_size
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    /// Weights in slot order.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    /// Input indices in slot order.
    pub fn inputs(&self) -> &[u32] {
        &self.inputs
    }

    /// Slot range of the edges feeding output neuron `o`.
    pub fn row_range(&self, o: usize) -> std::ops::Range<usize> {
        self.row_ptr[o]..self.row_ptr[o + 1]
    }

    /// Output neuron of every slot.
    pub fn outputs(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.edge_count());
        for o in 0..self.out_size {
            out.extend(std::iter::repeat_n(o, self.row_ptr[o + 1] - self.row_ptr[o]));
        }
        out
    }

    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        (0..self.out_size).flat_map(move |o| {
            self.row_range(o).map(move |k| Edge { input: self.inputs[k] as usize, output: o, weight: self.weights[k] })
        })
    }

    /// Slot of the edge `input → output`, if present.
    pub fn slot(&self, input: usize, output: usize) -> Option<usize> {
        if output >= self.out_size {
            return None;
        }
        let r = self.row_range(output);
        self.inputs[r.clone()].binary_search(&(input as u32)).ok().map(|k| r.start + k)
    }

    pub fn contains(&self, input: usize, output: usize) -> bool {
        self.slot(input, output).is_some()
    }

    pub fn weight(&self, input: usize, output: usize) -> Option<f64> {
        self.slot(input, output).map(|k| self.weights[k])
    }

    /// Number of links attached to each input neuron.
    pub fn input_degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.in_size];
        for &i in &self.inputs {
            d[i as usize] += 1;
        }
        d
    }

    /// Number of links attached to each output neuron.
    pub fn output_degrees(&self) -> Vec<usize> {
        self.row_ptr.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Output neighbours of every input neuron, ascending.
    pub fn neighbours_of_inputs(&self) -> Vec<Vec<u32>> {
        let mut adj = vec![Vec::new(); self.in_size];
        for o in 0..self.out_size {
            for k in self.row_range(o) {
                adj[self.inputs[k] as usize].push(o as u32);
            }
        }
        adj
    }

    /// Input neighbours of output neuron `o`, ascending.
    pub fn neighbours_of_output(&self, o: usize) -> &[u32] {
        &self.inputs[self.row_range(o)]
    }

    /// Keep the edges for which `keep(slot, edge)` is true. Returns the
    /// number of removed edges.
    pub fn retain<F>(&mut self, mut keep: F) -> usize
    where
        F: FnMut(usize, Edge) -> bool,
    {
        let before = self.edge_count();
        let mut row_ptr = vec![0usize; self.out_size + 1];
        let mut w = 0;
        for o in 0..self.out_size {
            for k in self.row_range(o) {
                let e = Edge { input: self.inputs[k] as usize, output: o, weight: self.weights[k] };
                if keep(k, e) {
                    self.inputs[w] = self.inputs[k];
                    self.weights[w] = self.weights[k];
                    w += 1;
                }
            }
            row_ptr[o + 1] = w;
        }
        self.inputs.truncate(w);
        self.weights.truncate(w);
        self.row_ptr = row_ptr;
        before - w
    }

    /// Remove the edges at the given slots.
    pub fn remove_slots(&mut self, slots: &[usize]) -> usize {
        let mut drop = vec![false; self.edge_count()];
        for &s in slots {
            drop[s] = true;
        }
        self.retain(|k, _| !drop[k])
    }

    /// Add new edges. Fails without modifying the layer if any of them is
    /// out of range, already present, or repeated.
    pub fn insert_edges(&mut self, new: &[(usize, usize, f64)]) -> Result<(), NetworkError> {
        for &(i, o, _) in new {
            if i >= self.in_size || o >= self.out_size {
                return Err(NetworkError::EdgeOutOfRange { input: i, output: o });
            }
            if self.contains(i, o) {
                return Err(NetworkError::DuplicateEdge { input: i, output: o });
            }
        }
        let merged: Vec<_> = self.edges().map(|e| (e.input, e.output, e.weight)).chain(new.iter().copied()).collect();
        *self = Self::from_edges(self.in_size, self.out_size, merged, self.bias.clone())?;
        Ok(())
    }
}
