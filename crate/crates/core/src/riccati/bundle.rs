use nalgebra::{DMatrix, DVector};

use crate::model::ModelParams;

/// The matrices that assemble the optimal feedback from `(P, K, phi, psi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientBundle {
    /// `R + D^T P D + D0^T P D0`, r x r.
    pub upsilon: DMatrix<f64>,
    /// `Upsilon + D0^T K D0`, r x r.
    pub upsilon_bar: DMatrix<f64>,
    /// `B^T P + D^T P C + D0^T P C0`, r x n.
    pub phi: DMatrix<f64>,
    /// Transpose of Phi-bar: `Phi^T + K B + C0^T K D0`, n x r.
    pub phi_bar_t: DMatrix<f64>,
    /// `B^T K + D^T P F + D0^T P F0 + D0^T K (C0 + F0)`, r x n.
    pub psi: DMatrix<f64>,
    /// `B^T phi + D^T P sigma + D0^T psi + D0^T P sigma0 + D0^T K sigma0`.
    pub theta: DVector<f64>,
}

/// `Upsilon(P)` and `Phi(P)` alone, enough for the symmetric equation.
pub fn upsilon_phi(params: &ModelParams, p: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let dt = params.d.transpose();
    let d0t = params.d0.transpose();
    let dtp = &dt * p;
    let d0tp = &d0t * p;
    let upsilon = &params.r + &dtp * &params.d + &d0tp * &params.d0;
    let phi = params.b.transpose() * p + &dtp * &params.c + &d0tp * &params.c0;
    (upsilon, phi)
}

/// Evaluate every coefficient at `(P, K, phi, psi)` and time `t`; `t` enters
/// only through `sigma(t)` and `sigma0(t)`.
pub fn bundle(
    p: &DMatrix<f64>,
    k: &DMatrix<f64>,
    varphi: &DVector<f64>,
    varpsi: &DVector<f64>,
    params: &ModelParams,
    t: f64,
) -> CoefficientBundle {
    let sigma = params.noise_offset.eval(t);
    let sigma0 = params.common_noise_offset.eval(t);
    let bt = params.b.transpose();
    let dt = params.d.transpose();
    let d0t = params.d0.transpose();
    let (upsilon, phi) = upsilon_phi(params, p);
    let upsilon_bar = &upsilon + &d0t * k * &params.d0;
    let phi_bar_t = phi.transpose() + k * &params.b + params.c0.transpose() * k * &params.d0;
    let psi = &bt * k
        + &dt * p * &params.f
        + &d0t * p * &params.f0
        + &d0t * k * (&params.c0 + &params.f0);
    let theta = &bt * varphi
        + &dt * (p * sigma)
        + &d0t * varpsi
        + &d0t * (p * &sigma0)
        + &d0t * (k * &sigma0);
    CoefficientBundle {
        upsilon,
        upsilon_bar,
        phi,
        phi_bar_t,
        psi,
        theta,
    }
}
