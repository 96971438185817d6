//! Reverse-mode differentiation over dense tensors and the CNN layers built on it.
//!
//! Activations use a channels-last `[batch, length, channels]` layout; the
//! convolution runs along `length`.

pub mod checkpoint;
pub mod graph;
pub mod layers;
pub mod optim;
pub mod params;
pub mod tensor;

pub use graph::{CustomOp, Gradients, Graph, NormStats, Var};
pub use layers::{BatchNorm1d, Mode, ResBlock, ResNet1d, ResNetSpec, SepConv1d};
pub use optim::{Adam, AdamConfig};
pub use params::{ParamEntry, ParamId, ParamStore};
pub use tensor::Tensor;
