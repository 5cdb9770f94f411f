//! Learned single-pass autofocus.
//!
//! The regressor sees the DRC image and the phase map of a defocused SLC
//! and predicts phase coefficients. Training backpropagates the relative
//! MNS improvement through the k-space correction, so no focused
//! reference is needed.

mod checkpoint;
mod net;
mod pipeline;
mod train;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, DAF1_MAGIC, DAF1_VERSION,
};
pub use net::{
    last_feature_map, pooled_features, regressor_forward, Conv2d, Dense, RegressorParams, Tensor,
    CONV_CHANNELS, HIDDEN_UNITS, LEAKY_SLOPE, MIN_INPUT_SIZE,
};
pub use pipeline::{
    infer, pipeline_backward, pipeline_forward, relative_sharpness_loss, PipelineOutput,
    PreparedInput,
};
pub use train::{
    batch_gradient, mean_loss, prepare_all, sgd_step, train, train_from, train_with_progress, TrainConfig,
    TrainHistory, TrainingData,
};
