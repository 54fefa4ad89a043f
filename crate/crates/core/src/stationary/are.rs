//! Algebraic equations for `P`, `K` and the stationary offset.

use nalgebra::{DMatrix, DVector};

use super::msstab::ms_stable;
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::ModelParams;
use crate::riccati::{bundle, k_rhs, p_rhs, upsilon_phi, FeedbackLaw};

/// Settings of the steady-state integration and Newton polish.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryOptions {
    /// RK4 step of the steady-state integration.
    pub step: f64,
    /// Longest integration time before giving up.
    pub max_horizon: f64,
    /// `||F||_F` below which the integration counts as stationary.
    pub steady_tol: f64,
    /// Residual accepted after the Newton polish.
    pub residual_tol: f64,
    pub max_newton: usize,
}

impl Default for StationaryOptions {
    fn default() -> Self {
        StationaryOptions {
            step: 0.01,
            max_horizon: 1e4,
            steady_tol: 1e-10,
            residual_tol: 1e-8,
            max_newton: 50,
        }
    }
}

/// Integrate `dY/dtau = F(Y)` forward in `tau` (backward in time) until
/// `||F(Y)||_F` drops below the tolerance.
fn integrate_to_steady(
    y0: DMatrix<f64>,
    opts: &StationaryOptions,
    what: &'static str,
    symmetric: bool,
    f: impl Fn(&DMatrix<f64>) -> DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let h = opts.step;
    let max_steps = (opts.max_horizon / h).ceil() as usize;
    let mut y = y0;
    for _ in 0..max_steps {
        let k1 = f(&y);
        if k1.norm() < opts.steady_tol {
            return Ok(y);
        }
        let k2 = f(&(&y + &k1 * (0.5 * h)));
        let k3 = f(&(&y + &k2 * (0.5 * h)));
        let k4 = f(&(&y + &k3 * h));
        y += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        if symmetric {
            y = linalg::symmetrize(&y);
        }
        if !linalg::all_finite(&y) || y.norm() > crate::riccati::BLOW_UP_NORM {
            return Err(Error::NonConvergence {
                what,
                detail: "steady-state integration escaped".into(),
            });
        }
    }
    let last = f(&y).norm();
    if last < opts.steady_tol {
        Ok(y)
    } else {
        Err(Error::NonConvergence {
            what,
            detail: format!(
                "no steady state within horizon {}; |F| = {last:.3e}",
                opts.max_horizon
            ),
        })
    }
}

/// Feedback gain `-Upsilon^{-1} Phi` of the symmetric equation.
pub fn p_gain(params: &ModelParams, p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (ups, phi) = upsilon_phi(params, p);
    Ok(-(linalg::inverse(&ups, "Upsilon")? * phi))
}

/// Kleinman step: given gain `L`, solve
/// `Ac^T X + X Ac + Cc^T X Cc + C0c^T X C0c + Q + L^T R L = 0`
/// with `Ac = A + B L`, `Cc = C + D L`, `C0c = C0 + D0 L`.
fn kleinman_step(params: &ModelParams, l: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = params.n();
    let ac = &params.a + &params.b * l;
    let cc = &params.c + &params.d * l;
    let c0c = &params.c0 + &params.d0 * l;
    let eye = DMatrix::identity(n, n);
    let act = ac.transpose();
    let op = linalg::kron(&eye, &act)
        + linalg::kron(&act, &eye)
        + linalg::kron(&cc.transpose(), &cc.transpose())
        + linalg::kron(&c0c.transpose(), &c0c.transpose());
    let rhs = -linalg::vec_of(&(&params.q + l.transpose() * &params.r * l));
    let x = op.lu().solve(&rhs)?;
    Some(linalg::symmetrize(&linalg::unvec(&x, n, n)))
}

/// Closed loop `[A + B L, C + D L, C0 + D0 L]` of the symmetric equation.
pub fn p_closed_loop(
    params: &ModelParams,
    l: &DMatrix<f64>,
) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    (
        &params.a + &params.b * l,
        &params.c + &params.d * l,
        &params.c0 + &params.d0 * l,
    )
}

/// Stabilizing solution of the symmetric algebraic Riccati equation.
///
/// Integrates the differential equation from `P = 0` to steady state, polishes
/// with Newton-Kleinman iterations and certifies mean-square stability of the
/// closed loop.
#[allow(non_snake_case)]
pub fn solve_stationary_P(params: &ModelParams, opts: &StationaryOptions) -> Result<DMatrix<f64>> {
    let n = params.n();
    if linalg::min_sym_eigenvalue(&params.q) < -1e-12 {
        return Err(Error::Precondition("stationary solver needs Q >= 0".into()));
    }
    if linalg::min_sym_eigenvalue(&params.r) <= 0.0 {
        return Err(Error::Precondition("stationary solver needs R > 0".into()));
    }
    let mut p = integrate_to_steady(DMatrix::zeros(n, n), opts, "stationary P", true, |p| {
        p_rhs(params, p)
    })?;

    let mut res = p_rhs(params, &p).norm();
    for _ in 0..opts.max_newton {
        if res <= 1e-14 * p.norm().max(1.0) {
            break;
        }
        let l = p_gain(params, &p)?;
        let next = match kleinman_step(params, &l) {
            Some(x) => x,
            None => break,
        };
        let next_res = p_rhs(params, &next).norm();
        if !(next_res < res) {
            break;
        }
        p = next;
        res = next_res;
    }
    if res > opts.residual_tol {
        return Err(Error::Inconsistent {
            equation: "stationary P",
            residual: res,
        });
    }
    let l = p_gain(params, &p)?;
    let (a, c, c0) = p_closed_loop(params, &l);
    if !ms_stable(&a, &c, &c0) {
        return Err(Error::NotStabilizing(
            "closed loop [A + B L, C + D L, C0 + D0 L] of the symmetric equation".into(),
        ));
    }
    Ok(p)
}

/// Outcome of the general route for `K`.
#[derive(Debug, Clone)]
pub struct GeneralK {
    pub k: DMatrix<f64>,
    pub residual: f64,
    /// False when Newton stalled above the residual tolerance.
    pub certified: bool,
}

/// `K` without structural hypotheses: steady-state integration of the
/// non-symmetric equation from `K = 0`, then Newton with a finite-difference
/// Jacobian.
pub fn solve_stationary_k_general(
    params: &ModelParams,
    p: &DMatrix<f64>,
    opts: &StationaryOptions,
) -> Result<GeneralK> {
    let n = params.n();
    let f = |k: &DMatrix<f64>| k_rhs(params, p, k);
    let mut k = integrate_to_steady(DMatrix::zeros(n, n), opts, "stationary K", false, f)?;
    let mut res = f(&k).norm();
    for _ in 0..opts.max_newton {
        if res <= 1e-14 * k.norm().max(1.0) {
            break;
        }
        let base = linalg::vec_of(&f(&k));
        let mut jac = DMatrix::zeros(n * n, n * n);
        for col in 0..n * n {
            let eps = 1e-7 * k.as_slice()[col].abs().max(1.0);
            let mut kp = k.clone();
            kp.as_mut_slice()[col] += eps;
            let fp = linalg::vec_of(&f(&kp));
            jac.set_column(col, &((fp - &base) / eps));
        }
        let delta = match jac.lu().solve(&(-&base)) {
            Some(d) => d,
            None => break,
        };
        let next = &k + linalg::unvec(&delta, n, n);
        let next_res = f(&next).norm();
        if !(next_res < res) {
            break;
        }
        k = next;
        res = next_res;
    }
    Ok(GeneralK {
        k,
        residual: res,
        certified: res <= opts.residual_tol,
    })
}

fn require_constant_offsets(params: &ModelParams) -> Result<()> {
    if params.has_constant_offsets() {
        Ok(())
    } else {
        Err(Error::Precondition(
            "stationary offsets need constant f, sigma, sigma0 and eta".into(),
        ))
    }
}

/// Constant offset `phi` making the drift of the offset equation vanish.
pub fn solve_stationary_offsets(
    params: &ModelParams,
    p: &DMatrix<f64>,
    k: &DMatrix<f64>,
) -> Result<DVector<f64>> {
    require_constant_offsets(params)?;
    let n = params.n();
    let zero = DVector::zeros(n);
    let b = bundle(p, k, &zero, &zero, params, 0.0);
    let upsb_inv = linalg::inverse(&b.upsilon_bar, "Upsilon-bar")?;
    let m = &b.phi_bar_t * &upsb_inv;
    let drift = params.a.transpose() - &m * params.b.transpose();
    if !linalg::is_hurwitz(&drift, 0.0)? {
        return Err(Error::NotStabilizing(
            "A^T - Phi-bar^T Upsilon-bar^{-1} B^T is not Hurwitz; no stationary offset".into(),
        ));
    }
    let pk = p + k;
    let sigma = params.noise_offset.eval(0.0);
    let sigma0 = params.common_noise_offset.eval(0.0);
    let forcing = (params.c.transpose() - &m * params.d.transpose()) * (p * sigma)
        + (params.c0.transpose() - &m * params.d0.transpose()) * (&pk * sigma0)
        + &pk * params.drift_offset.eval(0.0)
        - &params.q * params.target.eval(0.0);
    drift
        .lu()
        .solve(&(-forcing))
        .ok_or(Error::Singular("stationary offset drift"))
}

/// Closed loops certified for a stationary law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct LoopCertificate {
    /// `[A + B L_self, C + D L_self, C0 + D0 L_self]`.
    pub deviation_loop: bool,
    /// `[A + G + B L_mf, 0, C0 + F0 + D0 L_mf]`.
    pub mean_field_loop: bool,
}

/// Constant gains of the infinite-horizon law and the stability certificate
/// of both closed loops.
pub fn stationary_gains(
    params: &ModelParams,
    p: &DMatrix<f64>,
    k: &DMatrix<f64>,
    phi_bar: &DVector<f64>,
) -> Result<(FeedbackLaw, LoopCertificate)> {
    require_constant_offsets(params)?;
    let n = params.n();
    let b = bundle(p, k, phi_bar, &DVector::zeros(n), params, 0.0);
    for (name, w) in [("Upsilon", &b.upsilon), ("Upsilon-bar", &b.upsilon_bar)] {
        let e = linalg::min_sym_eigenvalue(w);
        if e <= 0.0 {
            return Err(Error::Precondition(format!(
                "{name} is not positive definite (min eigenvalue {e:.3e}); (A6) fails"
            )));
        }
    }
    let ups_inv = linalg::inverse(&b.upsilon, "Upsilon")?;
    let upsb_inv = linalg::inverse(&b.upsilon_bar, "Upsilon-bar")?;
    let ls = -(&ups_inv * &b.phi);
    let lm = -(&upsb_inv * (&b.phi + &b.psi));
    let c = -(&upsb_inv * &b.theta);
    let (a1, c1, c01) = p_closed_loop(params, &ls);
    let cert = LoopCertificate {
        deviation_loop: ms_stable(&a1, &c1, &c01),
        mean_field_loop: ms_stable(
            &(&params.a + &params.g + &params.b * &lm),
            &DMatrix::zeros(n, n),
            &(&params.c0 + &params.f0 + &params.d0 * &lm),
        ),
    };
    Ok((FeedbackLaw::constant(ls, lm, c), cert))
}
