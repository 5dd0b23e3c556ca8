// Negated float comparisons are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod dataset;
pub mod network;
pub mod robustness;
pub mod seed;
pub mod stats;
pub mod topology;
pub mod train;
