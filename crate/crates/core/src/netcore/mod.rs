//! Recurrent convolutional actor-critic network with reward-prediction and pixel-control
//! heads, forward evaluation, and exact reverse-mode gradients.

mod checkpoint;
mod config;
mod forward;
mod params;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CheckpointError};
pub use config::{ConvSpec, Geometry, NetworkConfig, PcSpec};
pub use forward::{
    forward, gradients, ForwardOutput, Head, HeadMask, LossEval, OutputGrad, RecurrentState, RolloutLoss, Trace,
    RP_FRAMES,
};
pub use params::{layout, ParamId, Parameters, Tensor};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NetError {
    #[error("invalid network config: {0}")]
    Config(String),
    #[error("shape mismatch at {layer}: expected {expected}, found {found}")]
    Shape { layer: &'static str, expected: String, found: String },
    #[error("sequence of {len} frames exceeds unroll length {unroll}")]
    SequenceTooLong { len: usize, unroll: usize },
    #[error("non-finite loss in the {0} head")]
    NonFinite(Head),
}
