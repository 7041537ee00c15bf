//! Dense f64 numeric core: tensors, parameter stores, the layer set used
//! by every model in this crate, SGD with global-norm clipping, gradient
//! checking and the checkpoint format.

pub mod checkpoint;
pub mod gradcheck;
pub mod layers;
pub mod params;
pub mod tensor;

#[cfg(test)]
mod grad_tests;

pub use gradcheck::{grad_check, GradCheckReport};
pub use params::{sgd_step, GradStore, ParamId, ParameterStore};
pub use tensor::Tensor;
