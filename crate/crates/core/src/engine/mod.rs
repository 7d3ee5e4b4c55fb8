//! Numerical core: flat parameter storage, forward-mode input jets through
//! the gated MLP, the matching reverse pass, and Adam.

pub mod derivs;
pub mod jet;
pub mod network;
pub mod objective;
pub mod optim;
pub mod params;

pub use derivs::{value_and_input_derivs, value_and_input_derivs_batch};
pub use jet::Order;
pub use objective::{loss_gradient, Objective};
pub use optim::{adam_step, clip_global_norm, cosine_lr, global_norm, OptimizerState};
pub use params::{ParamGroup, ParamVector};
