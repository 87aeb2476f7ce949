pub mod ablate;
pub mod dataset;
pub mod eval;
pub mod infer;
pub mod render;
pub mod solve;
pub mod train;
