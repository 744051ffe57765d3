//! Dense linear algebra, activations, losses and the Adam optimizer.
//!
//! Everything is `f64` and row-major. Layer weights have shape
//! `(fan_in, fan_out)` so a batch flows through as `x · w + b`.

mod adam;
mod layers;
mod matrix;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use layers::{
    affine_backward, affine_forward, bce_with_logits, mse, relu, relu_backward, sigmoid,
    softplus, AffineGrads,
};
pub use matrix::{matmul, matmul_nt, matmul_tn, Matrix};
