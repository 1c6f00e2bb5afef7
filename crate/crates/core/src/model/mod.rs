//! Two-hidden-layer multi-label network over sparse inputs.
//!
//! The network is the unit of federation: clients train copies of
//! [`MlpParams`], the server averages them with [`average_params`], and the
//! communication ledger charges [`MlpParams::byte_size`] per transfer.
//! Parameters are generic over [`Real`] so simulations run in `f32` while
//! gradient checks run in `f64`.

mod mlp;
mod real;
mod serialize;

pub use mlp::{
    average_params, init_mlp, log_sigmoid, sgd_step, sigmoid, Gradients, MlpConfig, MlpParams,
};
pub use real::{Precision, Real};
