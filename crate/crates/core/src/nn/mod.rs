//! Minimal dense neural-network building blocks with hand-written reverse mode.

mod init;
mod mlp;
mod optim;
mod params;

pub use init::{glorot, glorot_scaled};
pub use mlp::{Activation, Mlp, MlpCache};
pub use optim::{Optimizer, OptimizerKind};
pub use params::{NamedTensor, Params};
