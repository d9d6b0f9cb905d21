//! Polynomial neural ODEs.
//!
//! Trains π-net V1 polynomial networks and conventional MLPs as the
//! right-hand side of an ODE by backpropagating through explicit
//! Runge–Kutta steps, then expands trained polynomial networks into exact
//! multivariate polynomials.

pub mod bench;
pub mod error;
pub mod models;
pub mod ode;
pub mod poly;
pub mod systems;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use tensor::{ParamSet, Tape, Tensor, TensorLike, Var};
