//! Minimal reverse-mode automatic differentiation over fp64 matrices.
//!
//! Parameters live in a [`ParamStore`]. A forward pass records onto a fresh
//! [`Tape`]; [`Tape::backward`] writes gradients into the store and
//! [`adam_step`] consumes them.

mod adam;
mod params;
mod tape;
mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use params::{ParamId, ParamStore};
pub use tape::{bce_value, Tape, Unary, Var, PROB_CLAMP};
pub use tensor::Tensor;

#[cfg(test)]
mod tests;
