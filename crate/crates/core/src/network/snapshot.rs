//! Versioned binary snapshot of a [`Network`].
//!
//! ```text
//! "SPLNET\0\0"        8-byte tag
//! u32                 format version
//! u32, u64 × n        seed lineage
//! u8                  activation (0 = rectifier)
//! u32                 sparse layer count
//! per layer:          u32 in, u32 out, u64 links,
//!                     (u32 input, u32 output, f64 weight) × links,
//!                     f64 × out biases
//! readout:            u32 in, u32 out, f64 × in·out weights, f64 × out biases
//! ```
//!
//! All integers and floats are little-endian; floats are stored bit-exact.

use std::fs;
use std::path::Path;

use super::{DenseReadout, Network, NetworkError, SparseLayer};

pub const TAG: &[u8; 8] = b"SPLNET\0\0";
pub const VERSION: u32 = 1;

pub fn to_bytes(net: &Network) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + 16 * net.total_edges() + 8 * net.readout().weights().len());
    out.extend_from_slice(TAG);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(net.seed_lineage().len() as u32).to_le_bytes());
    for s in net.seed_lineage() {
        out.extend_from_slice(&s.to_le_bytes());
    }
    out.push(0);
    out.extend_from_slice(&(net.layers().len() as u32).to_le_bytes());
    for layer in net.layers() {
        out.extend_from_slice(&(layer.in_size() as u32).to_le_bytes());
        out.extend_from_slice(&(layer.out_size() as u32).to_le_bytes());
        out.extend_from_slice(&(layer.edge_count() as u64).to_le_bytes());
        for e in layer.edges() {
            out.extend_from_slice(&(e.input as u32).to_le_bytes());
            out.extend_from_slice(&(e.output as u32).to_le_bytes());
            out.extend_from_slice(&e.weight.to_le_bytes());
        }
        for b in layer.bias() {
            out.extend_from_slice(&b.to_le_bytes());
        }
    }
    let r = net.readout();
    out.extend_from_slice(&(r.in_size() as u32).to_le_bytes());
    out.extend_from_slice(&(r.out_size() as u32).to_le_bytes());
    for w in r.weights().iter().chain(r.bias()) {
        out.extend_from_slice(&w.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NetworkError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| NetworkError::Snapshot("truncated".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, NetworkError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<usize, NetworkError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn u64(&mut self) -> Result<u64, NetworkError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, NetworkError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, NetworkError> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| NetworkError::Snapshot("size overflow".into()))?)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }
}

pub fn from_bytes(bytes: &[u8]) -> Result<Network, NetworkError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != TAG {
        return Err(NetworkError::Snapshot("not a network snapshot".into()));
    }
    let version = r.u32()?;
    if version != VERSION as usize {
        return Err(NetworkError::Snapshot(format!("unsupported format version {version}")));
    }
    let n_seeds = r.u32()?;
    let lineage = (0..n_seeds).map(|_| r.u64()).collect::<Result<Vec<_>, _>>()?;
    let activation = r.u8()?;
    if activation != 0 {
        return Err(NetworkError::Snapshot(format!("unknown activation tag {activation}")));
    }
    let n_layers = r.u32()?;
    let mut layers = Vec::with_capacity(n_layers.min(64));
    for _ in 0..n_layers {
        let (n_in, n_out) = (r.u32()?, r.u32()?);
        let n_edges = r.u64()? as usize;
        if n_edges > n_in.saturating_mul(n_out) {
            return Err(NetworkError::Snapshot(format!("{n_edges} links in a {n_in}×{n_out} layer")));
        }
        let mut edges: Vec<(usize, usize, f64)> = Vec::with_capacity(n_edges.min(bytes.len() / 16));
        for _ in 0..n_edges {
            edges.push((r.u32()?, r.u32()?, r.f64()?));
        }
        let bias = r.f64s(n_out)?;
        layers.push(SparseLayer::from_edges(n_in, n_out, edges, bias)?);
    }
    let (n_in, n_out) = (r.u32()?, r.u32()?);
    let weights = r.f64s(n_in.saturating_mul(n_out))?;
    let bias = r.f64s(n_out)?;
    if r.pos != bytes.len() {
        return Err(NetworkError::Snapshot(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok(Network::new(layers, DenseReadout::new(n_in, n_out, weights, bias)?)?.with_seed_lineage(lineage))
}

pub fn save(net: &Network, path: &Path) -> Result<(), NetworkError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, to_bytes(net))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Network, NetworkError> {
    from_bytes(&fs::read(path)?)
}
