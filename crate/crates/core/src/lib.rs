// `!(x > 0.0)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod blockgraph;
pub mod error;
pub mod eval;
pub mod geom;
pub mod io;
pub mod pipeline;
pub mod rotsync;
pub mod synth;
pub mod transsync;
