//! Joint super-resolution and inverse tone-mapping of LR SDR video frames
//! into HR HDR (BT.2020, PQ, 10-bit) frames.
//!
//! The crate bundles a small reverse-mode tensor engine, the colorimetry
//! chain between SDR and HDR display formats, guided-filter decomposition,
//! the residual/modulation network, image-quality metrics, training-pair
//! production and the two-stage trainer.

pub mod autodiff;
mod binio;
pub mod colorimetry;
pub mod dataset;
pub mod decomposition;
pub mod error;
pub mod gradcheck;
pub mod metrics;
pub mod network;
pub mod optim;
pub mod selfcheck;
pub mod tensor;
pub mod trainer;

pub use autodiff::{DivMode, EltwiseKind, Tape, Var, DIV_FLOOR};
pub use error::{Error, Result};
pub use network::{InputLayout, Network, NetworkConfig, SmfInput, WeightStore};
pub use optim::{xavier_init, AdamState};
pub use tensor::{Element, Scale, Tensor};
