//! The spatial-temporal tensor graph convolutional forecaster.
//!
//! Data flow for one sample (`T x N x C` input):
//! 1. position embedding: input projection plus learnable temporal and
//!    spatial embeddings ([`forward::position_embed`]);
//! 2. a stack of graph-convolution layers, each applying one shared gated
//!    graph-convolution module to every triple of consecutive time steps on
//!    the reconstructed fusion adjacency, shrinking the time axis by two;
//! 3. in parallel, a two-layer gated dilated convolution along time;
//! 4. an output block that crops both branches to their common most-recent
//!    steps, concatenates features, and maps each node through two shared
//!    fully connected layers to `horizon` predictions.
//!
//! Predictions are denormalized with the dataset statistics before the
//! Huber loss and all metrics. Gradients are exact reverse-mode, written by
//! hand against the cached forward trace; training is plain Adam, fully
//! deterministic for a fixed seed in single-threaded mode.

pub mod backward;
pub mod checkpoint;
pub mod forward;
pub mod params;
pub mod train;


pub use backward::backward;
pub use checkpoint::Checkpoint;
pub use forward::{
    dilated_conv_forward, forward, forward_sample, glu_graph_conv, huber_grad, huber_loss,
    output_block, position_embed, stsgcm_forward, sttgcl_forward, ForwardTrace,
};
pub use params::{GluConvParams, ModelParams};
pub use train::{predict_samples, train, EpochStats, TrainOutcome};

use crate::error::{Error, Result};

/// Kernel width of the dilated temporal convolution.
pub const DILATED_KERNEL: usize = 2;
/// Number of stacked dilated convolution layers.
pub const DILATED_LAYERS: usize = 2;
/// Graph convolutions stacked inside one synchronous module.
pub const CONVS_PER_MODULE: usize = 3;

/// Model and training hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub n_nodes: usize,
    /// Input features per node (flow only by default).
    pub in_features: usize,
    /// Input window length T.
    pub window: usize,
    /// Prediction horizon.
    pub horizon: usize,
    /// Number of stacked spatial-temporal layers; each consumes two time
    /// steps.
    pub layers: usize,
    /// Output widths of the three stacked graph convolutions. Equal widths
    /// keep the elementwise-max aggregation well defined.
    pub filters: [usize; 3],
    /// Dilation rate of the temporal branch.
    pub dilation: usize,
    /// Channels of the dilated branch.
    pub dilated_channels: usize,
    /// Hidden width of the output block.
    pub fc_hidden: usize,
    pub huber_delta: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Early-stop patience on validation MAE, in epochs.
    pub patience: usize,
    pub seed: u64,
}

impl ModelConfig {
    /// Reference hyperparameters: 12-in/12-out windows, 4 layers of
    /// 64-64-64 filters, dilation 2, batch 32, learning rate 0.003, up to
    /// 5000 epochs with early stopping.
    pub fn defaults(n_nodes: usize) -> ModelConfig {
        ModelConfig {
            n_nodes,
            in_features: 1,
            window: 12,
            horizon: 12,
            layers: 4,
            filters: [64, 64, 64],
            dilation: 2,
            dilated_channels: 64,
            fc_hidden: 128,
            huber_delta: 1.0,
            learning_rate: 0.003,
            batch_size: 32,
            max_epochs: 5000,
            patience: 30,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("n_nodes", self.n_nodes),
            ("in_features", self.in_features),
            ("window", self.window),
            ("horizon", self.horizon),
            ("layers", self.layers),
            ("dilation", self.dilation),
            ("dilated_channels", self.dilated_channels),
            ("fc_hidden", self.fc_hidden),
            ("batch_size", self.batch_size),
            ("max_epochs", self.max_epochs),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::usage(format!("{name} must be positive")));
            }
        }
        if self.filters.iter().any(|f| *f == 0) {
            return Err(Error::usage("filter widths must be positive".to_string()));
        }
        if self.filters[0] != self.filters[1] || self.filters[1] != self.filters[2] {
            return Err(Error::usage(
                "filter widths must be equal for the max-pool aggregation".to_string(),
            ));
        }
        if self.window < 2 * self.layers + 1 {
            return Err(Error::usage(format!(
                "window {} too short: each of the {} layers crops 2 steps",
                self.window, self.layers
            )));
        }
        if self.dilated_steps() < 1 {
            return Err(Error::usage(format!(
                "window {} too short for the dilated receptive field {}",
                self.window,
                DILATED_LAYERS * (DILATED_KERNEL - 1) * self.dilation
            )));
        }
        if !(self.huber_delta > 0.0) {
            return Err(Error::usage("huber_delta must be > 0".to_string()));
        }
        if !(self.learning_rate >= 0.0) {
            return Err(Error::usage("learning_rate must be >= 0".to_string()));
        }
        Ok(())
    }

    /// Embedding width: the first filter width.
    pub fn embed_width(&self) -> usize {
        self.filters[0]
    }

    /// Feature width leaving every spatial-temporal layer.
    pub fn stt_width(&self) -> usize {
        self.filters[2]
    }

    /// Time steps surviving the layer stack.
    pub fn stt_steps(&self) -> usize {
        self.window - 2 * self.layers
    }

    /// Time steps surviving the dilated branch.
    pub fn dilated_steps(&self) -> usize {
        self.window
            .saturating_sub(DILATED_LAYERS * (DILATED_KERNEL - 1) * self.dilation)
    }

    /// Common cropped length of the two branches entering the output block.
    pub fn merged_steps(&self) -> usize {
        self.stt_steps().min(self.dilated_steps())
    }

    /// Flattened per-node feature width entering the first FC layer.
    pub fn fc_in(&self) -> usize {
        self.merged_steps() * (self.stt_width() + self.dilated_channels)
    }

    /// Closed-form learnable parameter count for this configuration.
    pub fn param_count(&self) -> usize {
        let c0 = self.embed_width();
        let mut total = self.window * c0 // temporal embedding
            + self.n_nodes * c0          // spatial embedding
            + self.in_features * c0 + c0; // input projection
        for layer in 0..self.layers {
            let mut c_in = if layer == 0 { c0 } else { self.stt_width() };
            for &c_out in &self.filters {
                total += 2 * (c_in * c_out + c_out); // two gated paths
                c_in = c_out;
            }
        }
        let cd = self.dilated_channels;
        let mut c_in = c0;
        for _ in 0..DILATED_LAYERS {
            total += 2 * (DILATED_KERNEL * c_in * cd + cd);
            c_in = cd;
        }
        total += self.fc_in() * self.fc_hidden + self.fc_hidden;
        total += self.fc_hidden * self.horizon + self.horizon;
        total
    }
}
