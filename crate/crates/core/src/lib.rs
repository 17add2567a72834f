//! Primal-dual splitting for monotone inclusions and composite convex
//! minimization with infimal-convolution coupling.

pub mod cli;
pub mod error;
pub mod fbf;
pub mod linalg;
pub mod minimize;
pub mod operators;
pub mod oracle;
pub mod prox;

pub use error::{Error, Result};
