//! Infinite-horizon problem: algebraic Riccati equations, the equation for
//! `Pi = P + K` through an ordered Schur split, mean-square stability tests and
//! the constant feedback law.
//!
//! `P` comes from steady-state integration polished by Newton-Kleinman. When
//! `D0 = 0` and `C0` (or `C0 + F0`) is a multiple of the identity, `K = Pi - P`
//! with `Pi` read off the stable invariant subspace. Otherwise `K` falls back
//! to steady-state integration plus Newton, and the result is flagged when the
//! residual stalls.

mod are;
mod csplit;
mod msstab;
mod schur;

pub use are::{
    p_closed_loop, p_gain, solve_stationary_P, solve_stationary_k_general,
    solve_stationary_offsets, stationary_gains, GeneralK, LoopCertificate, StationaryOptions,
};
pub use csplit::{
    build_csplitting, detect_variant, solve_Pi, solve_pi_from, CSplittingMatrix, EigenSplit,
    Variant, AXIS_TOL, MAX_SUBSPACE_COND, PI_RESIDUAL_TOL,
};
pub use msstab::{ms_stable, second_moment_generator, MS_MARGIN};
pub use schur::{ordered_schur, OrderedSchur};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Horizon, ModelParams};
use crate::riccati::{k_rhs, p_rhs, phi_rhs, FeedbackLaw};

/// How `K` was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum KRoute {
    /// `K = Pi - P` from the split of the given variant.
    Split(Variant),
    /// Steady-state integration and Newton.
    General,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StationaryResiduals {
    pub p: f64,
    pub k: f64,
    /// Residual of the `Pi` equation, when the split route ran.
    pub pi: Option<f64>,
    pub phi: f64,
}

#[derive(Debug, Clone)]
pub struct StationarySolution {
    pub p: DMatrix<f64>,
    pub k: DMatrix<f64>,
    pub pi: Option<DMatrix<f64>>,
    pub phi_bar: DVector<f64>,
    pub k_route: KRoute,
    /// False when the general `K` route stalled above tolerance.
    pub k_certified: bool,
    pub residuals: StationaryResiduals,
    pub law: FeedbackLaw,
    pub loops: LoopCertificate,
    pub csplit: Option<CSplittingMatrix>,
}

impl StationarySolution {
    /// Both closed loops mean-square stable and `K` certified.
    pub fn is_certified(&self) -> bool {
        self.k_certified && self.loops.deviation_loop && self.loops.mean_field_loop
    }
}

/// Solve the stationary problem end to end.
pub fn solve_stationary(
    params: &ModelParams,
    opts: &StationaryOptions,
) -> Result<StationarySolution> {
    if params.horizon != Horizon::Infinite {
        return Err(Error::Precondition(
            "stationary solver needs an infinite horizon".into(),
        ));
    }
    let p = solve_stationary_P(params, opts)?;

    let (k, pi, k_route, k_certified, csplit) = match detect_variant(params) {
        Some(variant) => {
            let cs = build_csplitting(params, &p, variant)?;
            let pi = solve_pi_from(&cs)?;
            (&pi - &p, Some(pi), KRoute::Split(variant), true, Some(cs))
        }
        None => {
            let g = solve_stationary_k_general(params, &p, opts)?;
            (g.k, None, KRoute::General, g.certified, None)
        }
    };

    let phi_bar = solve_stationary_offsets(params, &p, &k)?;
    let (law, loops) = stationary_gains(params, &p, &k, &phi_bar)?;
    let residuals = StationaryResiduals {
        p: p_rhs(params, &p).norm(),
        k: k_rhs(params, &p, &k).norm(),
        pi: match (&csplit, &pi) {
            (Some(cs), Some(pi)) => Some(cs.residual(pi)),
            _ => None,
        },
        phi: phi_rhs(params, &p, &k, &phi_bar, 0.0).norm(),
    };
    Ok(StationarySolution {
        p,
        k,
        pi,
        phi_bar,
        k_route,
        k_certified,
        residuals,
        law,
        loops,
        csplit,
    })
}
