//! Model reductions: exponential discounting and cross terms in the running
//! cost, both mapped back to the undiscounted, cross-term-free form.

use nalgebra::{DMatrix, DVector};

use super::{Horizon, ModelParams, Signal};
use crate::error::{Error, Result};
use crate::linalg;

/// Undiscounted model equivalent to discounting the cost of `params` by
/// `exp(-rho t)`.
///
/// With `x = exp(-rho t / 2) y` and `u = exp(-rho t / 2) v`, the state
/// equation keeps its form with `A - rho/2 I`, and the offsets `f, sigma,
/// sigma0, eta` pick up the factor `exp(-rho t / 2)`; `eta0` is scaled by
/// `exp(-rho T / 2)`. The initial law is unchanged.
pub fn discount_transform(params: &ModelParams, rho: f64) -> Result<ModelParams> {
    if !(rho.is_finite() && rho >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "rho",
            reason: format!("discount rate must be finite and nonnegative, got {rho}"),
        });
    }
    let t_end = match params.horizon {
        Horizon::Finite(t) => t,
        Horizon::Infinite => {
            return Err(Error::Precondition(
                "discount transform needs a finite horizon".into(),
            ))
        }
    };
    if rho == 0.0 {
        return Ok(params.clone());
    }
    let half = 0.5 * rho;
    let n = params.n();
    let mut out = params.clone();
    out.a = &params.a - DMatrix::identity(n, n) * half;
    out.drift_offset = params.drift_offset.discounted(half);
    out.noise_offset = params.noise_offset.discounted(half);
    out.common_noise_offset = params.common_noise_offset.discounted(half);
    out.target = params.target.discounted(half);
    out.terminal_target = &params.terminal_target * (-half * t_end).exp();
    Ok(out)
}

/// Affine control map between a cross-term model and its completed-square
/// form: `u = v + L (x_i - Gamma x^N - eta(t))` with `L = R^{-1} S^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlShift {
    pub gain: DMatrix<f64>,
    pub gamma: DMatrix<f64>,
    pub target: Signal,
}

impl ControlShift {
    fn tracking(&self, x: &DVector<f64>, x_avg: &DVector<f64>, t: f64) -> DVector<f64> {
        x - &self.gamma * x_avg - self.target.eval(t)
    }

    /// Control of the transformed model given the original control `v`.
    pub fn to_transformed(
        &self,
        v: &DVector<f64>,
        x: &DVector<f64>,
        x_avg: &DVector<f64>,
        t: f64,
    ) -> DVector<f64> {
        v + &self.gain * self.tracking(x, x_avg, t)
    }

    /// Control of the original cross-term model given the transformed `u`.
    pub fn to_original(
        &self,
        u: &DVector<f64>,
        x: &DVector<f64>,
        x_avg: &DVector<f64>,
        t: f64,
    ) -> DVector<f64> {
        u - &self.gain * self.tracking(x, x_avg, t)
    }
}

/// Complete the square in a running cost carrying the cross term
/// `2 (x_i - Gamma x^N - eta)^T S v_i`.
///
/// Returns the equivalent model without cross term together with the control
/// map relating the two. `S = 0` returns `params` unchanged.
pub fn cross_term_transform(
    params: &ModelParams,
    s: &DMatrix<f64>,
) -> Result<(ModelParams, ControlShift)> {
    let (n, r) = (params.n(), params.r_dim());
    if s.shape() != (n, r) {
        return Err(Error::Dimension {
            name: "S",
            expected: format!("{n}x{r}"),
            got: format!("{}x{}", s.nrows(), s.ncols()),
        });
    }
    if !linalg::all_finite(s) {
        return Err(Error::NonFinite("S"));
    }
    let r_inv = linalg::inverse(&params.r, "R")?;
    let gain = &r_inv * s.transpose();
    let shift = ControlShift {
        gain: gain.clone(),
        gamma: params.gamma.clone(),
        target: params.target.clone(),
    };
    if s.iter().all(|&x| x == 0.0) {
        return Ok((params.clone(), shift));
    }

    let mut out = params.clone();
    out.q = linalg::symmetrize(&(&params.q - s * &gain));
    let rows = [
        (&params.b, &mut out.a, &mut out.g, &mut out.drift_offset, &params.a, &params.g, &params.drift_offset),
        (&params.d, &mut out.c, &mut out.f, &mut out.noise_offset, &params.c, &params.f, &params.noise_offset),
        (
            &params.d0,
            &mut out.c0,
            &mut out.f0,
            &mut out.common_noise_offset,
            &params.c0,
            &params.f0,
            &params.common_noise_offset,
        ),
    ];
    for (ctrl, state, mean, offset, state0, mean0, offset0) in rows {
        let m = ctrl * &gain;
        *state = state0 - &m;
        *mean = mean0 + &m * &params.gamma;
        *offset = offset0.plus_mapped(&m, &params.target);
    }
    Ok((out, shift))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(horizon: Horizon) -> ModelParams {
        ModelParams::zeros(1, 1, horizon)
    }

    #[test]
    fn zero_discount_is_identity() {
        let p = super::super::presets::paper_sec4();
        assert_eq!(discount_transform(&p, 0.0).unwrap(), p);
    }

    #[test]
    fn discount_shifts_drift() {
        let p = scalar(Horizon::Finite(1.0));
        let out = discount_transform(&p, 0.2).unwrap();
        assert_eq!(out.a[(0, 0)], -0.1);
    }

    #[test]
    fn negative_discount_rejected() {
        let p = scalar(Horizon::Finite(1.0));
        assert!(discount_transform(&p, -0.1).is_err());
    }

    #[test]
    fn zero_cross_term_is_identity() {
        let p = super::super::presets::paper_sec4();
        let (out, _) = cross_term_transform(&p, &DMatrix::zeros(2, 1)).unwrap();
        assert_eq!(out, p);
    }

    #[test]
    fn cross_term_scalar_weight() {
        let mut p = scalar(Horizon::Finite(1.0));
        p.q[(0, 0)] = 2.0;
        p.r[(0, 0)] = 0.5;
        let (out, shift) = cross_term_transform(&p, &DMatrix::from_element(1, 1, 1.0)).unwrap();
        assert_eq!(out.q[(0, 0)], 0.0);
        assert_eq!(shift.gain[(0, 0)], 2.0);
    }

    #[test]
    fn singular_control_weight_rejected() {
        let mut p = scalar(Horizon::Finite(1.0));
        p.r[(0, 0)] = 0.0;
        assert!(matches!(
            cross_term_transform(&p, &DMatrix::from_element(1, 1, 1.0)),
            Err(Error::Singular("R"))
        ));
    }

    #[test]
    fn control_map_round_trips() {
        let mut p = scalar(Horizon::Finite(1.0));
        p.gamma[(0, 0)] = 0.5;
        p.target = Signal::constant(&[0.3]);
        let (_, shift) = cross_term_transform(&p, &DMatrix::from_element(1, 1, 0.7)).unwrap();
        let x = DVector::from_element(1, 1.2);
        let xa = DVector::from_element(1, -0.4);
        let v = DVector::from_element(1, 0.9);
        let u = shift.to_transformed(&v, &x, &xa, 0.5);
        let back = shift.to_original(&u, &x, &xa, 0.5);
        assert!((back[0] - v[0]).abs() < 1e-15);
    }
}
