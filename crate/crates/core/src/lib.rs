//! Two-stage multi-grade deep learning for nonlinear PDEs.
//!
//! The library trains a stack of tanh feed-forward networks against the
//! residual of a PDE plus initial/boundary mismatch (the usual collocation
//! loss). Grades are trained one at a time: each new grade is a fresh
//! network stacked on the frozen last hidden layer of the previous one and
//! learns what the running sum of earlier grades left behind. A second
//! stage unfreezes the hidden layers nearest the output and retrains them
//! from the stage-one minimizer.
//!
//! Shipped problems are the 1D/2D/3D viscous Burgers equations with exact
//! solutions for error reporting. Everything is `f64` and deterministic
//! under a fixed seed.

pub mod autodiff;
pub mod config;
pub mod error;
pub mod gradestack;
pub mod loss;
pub mod metrics;
pub mod network;
pub mod optimizer;
pub mod problems;
pub mod runner;
pub mod sampling;
pub mod selfcheck;
pub mod trainer;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
