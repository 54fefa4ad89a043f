//! Linear-quadratic mean-field games with multiplicative idiosyncratic and
//! common noise: Riccati solvers for the finite and infinite horizon,
//! decentralized feedback synthesis, N-agent simulation and empirical
//! equilibrium checks.
//!
//! A typical pipeline builds [`model::ModelParams`], solves with
//! [`riccati::solve_riccati`], turns the solution into a
//! [`riccati::FeedbackLaw`] and simulates it with
//! [`simulate::simulate_population`].

pub mod error;
pub mod export;
pub mod linalg;
pub mod model;
pub mod riccati;
pub mod rng;
pub mod simulate;
pub mod stationary;
pub mod verify;

pub use error::{Error, ErrorCategory, Result};
pub use nalgebra::{DMatrix, DVector};
