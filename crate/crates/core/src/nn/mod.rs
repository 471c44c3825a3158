//! Dense network kernels with analytic gradients, softmax, cross-entropy,
//! Adam, and a finite-difference checker.

pub mod adam;
pub mod gradcheck;
pub mod layer;
pub mod matrix;
pub mod params;
pub mod softmax;

pub use adam::{Adam, AdamConfig, AdamState};
pub use gradcheck::{finite_diff_grad, relative_error};
pub use layer::{dense_forward, Activation, DenseLayer, Mlp, Trace};
pub use matrix::{dot, squared_distance, Matrix};
pub use params::{assign_flat, flatten, Parameters};
pub use softmax::{cross_entropy, softmax, ProbVector};
