//! Special functions, SPD linear algebra and finite-difference oracles.

mod fdiff;
mod linalg;
mod special;

pub use fdiff::{default_step, finite_diff_gradient, finite_diff_jacobian, max_relative_error};
pub use linalg::{spd_factorize, Cholesky, Matrix};
pub use special::{
    digamma, log_gamma, log_sigmoid, log_sum_exp, sigmoid, softmax, tetragamma, trigamma,
};
