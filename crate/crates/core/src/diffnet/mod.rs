//! A small deterministic reverse-mode differentiation engine on `f64`
//! `[C,H,W]` tensors, with dilated convolution, pooling, bilinear resizing and
//! the two training losses used by the channel networks.

mod gradcheck;
mod graph;
mod layer;
pub mod ops;
mod params;
mod tensor;

pub use gradcheck::{grad_check, GradCheck};
pub use graph::{Graph, Var};
pub use layer::{LayerSpec, Sequential};
pub use ops::ConvGeometry;
pub use params::{seeded_rng, xavier_uniform, NetworkParams, Sgd, WEIGHTS_MAGIC};
pub use tensor::Tensor;
