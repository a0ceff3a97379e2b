//! Forward-only Swin-Conv block and the four-scale UNet built from it.
//!
//! Weights are drawn deterministically from a seed; nothing here trains.
//! The point is to check dataflow: shapes, the split/concat/residual
//! structure of a block, attention normalization and parameter counts.

pub mod block;
pub mod error;
pub mod model;
pub mod ops;
pub mod swin;
pub mod tensor;

pub use block::{rconv_forward, sc_block_forward, swint_forward, Activation, RConv, ScBlock};
pub use error::{Error, Result};
pub use model::{parameter_count, scunet_forward, Scunet, ScunetConfig};
pub use ops::Params;
pub use swin::SwinBlock;
pub use tensor::Tensor4;
