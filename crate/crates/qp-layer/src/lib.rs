//! Conic QP/LP solving and implicit differentiation.
//!
//! `ipm` is a dense Mehrotra-style primal-dual interior-point method;
//! `diff` pushes loss cotangents through the linearized KKT system onto the
//! program's parameter vector; `node` wraps both as a custom autodiff op so
//! whole predict-then-optimize pipelines stay end-to-end differentiable.

pub mod diff;
pub mod error;
pub mod ipm;
pub mod linalg;
pub mod node;
pub mod testgen;

pub use diff::differentiate;
pub use error::QpError;
pub use ipm::{solve, solve_with, KktPoint, Residuals, SolveStatus, SolverOptions};
pub use node::{ConicQpOp, ProgramTemplate};
