//! Finite-horizon backward system and the decentralized feedback law it
//! defines.
//!
//! With the coefficient bundle of [`bundle`], the symmetric equation
//!
//! ```text
//! P' + PA + A^T P + C^T P C + C0^T P C0 - Phi^T Upsilon^+ Phi + Q = 0,   P(T) = H
//! ```
//!
//! is solved first, then the non-symmetric equation for `K` with
//! `K(T) = -H Gamma0`, then the linear equation for the offset `phi` with
//! `phi(T) = -H eta0`. All three run backward with fixed-step RK4 on a
//! [`TimeGrid`].

mod bundle;
mod feedback;
mod grid;
mod solve;

pub use bundle::{bundle, upsilon_phi, CoefficientBundle};
pub use feedback::{feedback_law, FeedbackLaw};
pub use grid::TimeGrid;
pub use solve::{
    k_rhs, p_rhs, phi_rhs, solve_K, solve_P, solve_phi, solve_riccati, KTrajectory, PTrajectory,
    PhiTrajectory, RangePolicy, RiccatiDiagnostics, RiccatiSolution, BLOW_UP_NORM, DEFAULT_STEPS,
};

pub use crate::linalg::{pinv, PINV_RTOL};
