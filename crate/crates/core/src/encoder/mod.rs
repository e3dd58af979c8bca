//! Spatial-temporal encoder: stacked graph convolutions over the current
//! building features, multi-head attention over each building's recent
//! history, and an affine fusion of the two.

mod backward;
mod export;
mod forward;
mod params;
mod table;

pub use backward::encoder_backward;
pub use export::{read_attention_csv, write_attention_csv, AttentionRow};
pub use forward::{
    attention_weights, encode, encode_steps, fuse, gcn_layer, softmax, temporal_attention, ForwardCache,
    StreamingEncoder,
};
pub use params::{EncoderConfig, EncoderParams, ParamGrads};
pub use table::{FeatureTable, StateHistory};

#[derive(Debug, thiserror::Error)]
pub enum EncoderError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("cached forward pass was computed with different parameters or inputs")]
    StaleCache,
    #[error("attention file: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
