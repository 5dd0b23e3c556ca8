//! Fixtures shared by the benchmarks.

use sparselab_core::dataset::LabeledImageSet;
use sparselab_core::network::{init_network, Network};
use sparselab_core::seed;

pub const DESK_SIZES: [usize; 4] = [784, 1000, 1000, 1000];
pub const DESK_DENSITY: f64 = 0.01;

/// A freshly initialized desk-scale network.
pub fn desk_network(seed: u64) -> Network {
    init_network(&DESK_SIZES, 10, DESK_DENSITY, seed).expect("valid desk config")
}

/// `n` pseudo-random images with labels cycling through 10 classes.
pub fn noise_images(n: usize, salt: u64) -> LabeledImageSet {
    let images = (0..n * 784).map(|i| (seed::derive(salt, i as u64) >> 40) as f32 / (1u64 << 24) as f32).collect();
    let labels = (0..n).map(|i| (i % 10) as u8).collect();
    LabeledImageSet::new(images, labels, 10).expect("valid images")
}
