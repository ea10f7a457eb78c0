//! Spatial-temporal fusion graph reconstruction via tensor decomposition,
//! plus a tensor-graph convolutional forecaster for road-network traffic
//! series.
//!
//! The crate has three layers:
//!
//! * dense rank-3 tensor algebra ([`tensor`]) and the Tucker / L1-Tucker /
//!   Tensor-Train decompositions built on it ([`decomp`]);
//! * the localized spatial-temporal fusion graph, its tensor form, and the
//!   offline reconstruction pipeline producing the real-valued adjacency
//!   used by the model ([`graph`]);
//! * the forecaster itself: position embedding, gated graph convolutions on
//!   the fusion graph, a dilated temporal branch, hand-written reverse-mode
//!   gradients, and an Adam training loop ([`net`]), with data ingestion in
//!   [`data`] and evaluation metrics in [`metrics`].
//!
//! The `sttgcn` binary wires the layers into a CLI; see the crate README.

pub mod data;
pub mod decomp;
pub mod error;
pub mod graph;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod net;
pub mod tensor;

pub mod cli;
pub mod config;

pub use error::{Error, Result};
pub use tensor::{DenseMatrix, DenseTensor3, Mode};
