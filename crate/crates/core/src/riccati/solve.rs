//! Backward fixed-step RK4 for the symmetric equation in `P`, the
//! non-symmetric equation in `K` and the linear offset equation in `phi`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::bundle::{bundle, upsilon_phi, CoefficientBundle};
use super::grid::TimeGrid;
use crate::error::{Error, Result};
use crate::linalg::{self, PINV_RTOL};
use crate::model::{Horizon, ModelParams};

/// Frobenius norm beyond which a trajectory is declared to have escaped.
pub const BLOW_UP_NORM: f64 = 1e12;

/// Default number of RK4 steps on the horizon.
pub const DEFAULT_STEPS: usize = 2000;

/// What to do when Upsilon or Upsilon-bar loses positivity or the range
/// inclusions fail at a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RangePolicy {
    /// Stop with an error.
    #[default]
    Strict,
    /// Record the node as failing and continue.
    Record,
}

/// `F_P(P)` with `dP/dt = -F_P(P)`.
pub fn p_rhs(params: &ModelParams, p: &DMatrix<f64>) -> DMatrix<f64> {
    let (ups, phi) = upsilon_phi(params, p);
    let ups_pinv = linalg::pinv(&ups, PINV_RTOL);
    let at = params.a.transpose();
    p * &params.a + &at * p + params.c.transpose() * p * &params.c
        + params.c0.transpose() * p * &params.c0
        - phi.transpose() * ups_pinv * &phi
        + &params.q
}

/// `F_K(P, K)` with `dK/dt = -F_K(P, K)`.
pub fn k_rhs(params: &ModelParams, p: &DMatrix<f64>, k: &DMatrix<f64>) -> DMatrix<f64> {
    let n = params.n();
    let zero = DVector::zeros(n);
    let b = bundle(p, k, &zero, &zero, params, 0.0);
    k_rhs_from(params, p, k, &b)
}

fn k_rhs_from(
    params: &ModelParams,
    p: &DMatrix<f64>,
    k: &DMatrix<f64>,
    b: &CoefficientBundle,
) -> DMatrix<f64> {
    let ups_pinv = linalg::pinv(&b.upsilon, PINV_RTOL);
    let upsb_pinv = linalg::pinv(&b.upsilon_bar, PINV_RTOL);
    let c0f0 = &params.c0 + &params.f0;
    k * (&params.a + &params.g) + p * &params.g + params.a.transpose() * k
        + b.phi.transpose() * ups_pinv * &b.phi
        - &b.phi_bar_t * upsb_pinv * (&b.phi + &b.psi)
        + params.c.transpose() * p * &params.f
        + params.c0.transpose() * p * &params.f0
        + params.c0.transpose() * k * c0f0
        - &params.q * &params.gamma
}

/// `F_phi(P, K, phi, t)` with `dphi/dt = -F_phi` and `psi = 0`.
pub fn phi_rhs(
    params: &ModelParams,
    p: &DMatrix<f64>,
    k: &DMatrix<f64>,
    varphi: &DVector<f64>,
    t: f64,
) -> DVector<f64> {
    let n = params.n();
    let b = bundle(p, k, varphi, &DVector::zeros(n), params, t);
    let m = &b.phi_bar_t * linalg::pinv(&b.upsilon_bar, PINV_RTOL);
    let pk = p + k;
    let sigma = params.noise_offset.eval(t);
    let sigma0 = params.common_noise_offset.eval(t);
    let f = params.drift_offset.eval(t);
    let eta = params.target.eval(t);
    (params.a.transpose() - &m * params.b.transpose()) * varphi
        + (params.c.transpose() - &m * params.d.transpose()) * (p * sigma)
        + (params.c0.transpose() - &m * params.d0.transpose()) * (&pk * sigma0)
        + &pk * f
        - &params.q * eta
}

/// One backward RK4 step from `t_hi` to `t_lo` for `dy/dt = g(stage, t, y)`,
/// where `stage` is 0 at `t_hi`, 1 at the midpoint and 2 at `t_lo`.
fn rk4_back<S, G>(y: &S, t_hi: f64, t_lo: f64, mut g: G) -> S
where
    S: Clone + std::ops::Add<S, Output = S> + std::ops::Mul<f64, Output = S>,
    G: FnMut(usize, f64, &S) -> S,
{
    let h = t_hi - t_lo;
    let t_mid = 0.5 * (t_hi + t_lo);
    let k1 = g(0, t_hi, y);
    let k2 = g(1, t_mid, &(y.clone() + k1.clone() * (-0.5 * h)));
    let k3 = g(1, t_mid, &(y.clone() + k2.clone() * (-0.5 * h)));
    let k4 = g(2, t_lo, &(y.clone() + k3.clone() * (-h)));
    y.clone() + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (-h / 6.0)
}

/// Cubic Hermite value at the midpoint of `[t_lo, t_hi]` from endpoint
/// values and time derivatives.
fn hermite_mid<S>(lo: &S, hi: &S, dlo: &S, dhi: &S, h: f64) -> S
where
    S: Clone
        + std::ops::Add<S, Output = S>
        + std::ops::Sub<S, Output = S>
        + std::ops::Mul<f64, Output = S>,
{
    (lo.clone() + hi.clone()) * 0.5 + (dlo.clone() - dhi.clone()) * (h / 8.0)
}

fn escaped(m: &DMatrix<f64>) -> bool {
    !linalg::all_finite(m) || m.norm() > BLOW_UP_NORM
}

fn terminal_time(params: &ModelParams, grid: &TimeGrid) -> Result<f64> {
    match params.horizon {
        Horizon::Finite(t) if t == grid.t_end() => Ok(t),
        Horizon::Finite(t) => Err(Error::GridMismatch(format!(
            "grid ends at {} but the horizon is {t}",
            grid.t_end()
        ))),
        Horizon::Infinite => Err(Error::Precondition(
            "the backward Riccati system needs a finite horizon".into(),
        )),
    }
}

/// Tolerance for calling a symmetric weight positive semidefinite.
fn psd_tol(m: &DMatrix<f64>) -> f64 {
    1e-10 * m.amax().max(1.0)
}

struct NodeCheck {
    ok: bool,
    min_eig: f64,
}

fn check_weight(
    weight: &'static str,
    w: &DMatrix<f64>,
    required: &[DMatrix<f64>],
    t: f64,
    policy: RangePolicy,
) -> Result<NodeCheck> {
    let min_eig = linalg::min_sym_eigenvalue(w);
    let w_pinv = linalg::pinv(w, PINV_RTOL);
    let positive = min_eig >= -psd_tol(w);
    let in_range = required
        .iter()
        .all(|cols| linalg::columns_in_range(w, &w_pinv, cols));
    if policy == RangePolicy::Strict {
        if !positive {
            return Err(Error::IndefiniteWeight {
                weight,
                time: t,
                min_eig,
            });
        }
        if !in_range {
            return Err(Error::RangeCondition {
                weight,
                time: t,
                detail: format!("{weight} is singular and misses a required direction (A5)"),
            });
        }
    }
    Ok(NodeCheck {
        ok: positive && in_range,
        min_eig,
    })
}

#[derive(Debug, Clone)]
pub struct PTrajectory {
    pub values: Vec<DMatrix<f64>>,
    /// `dP/dt` at every node.
    pub derivs: Vec<DMatrix<f64>>,
    pub range_ok: Vec<bool>,
    pub min_eig_upsilon: f64,
}

#[derive(Debug, Clone)]
pub struct KTrajectory {
    pub values: Vec<DMatrix<f64>>,
    /// `dK/dt` at every node.
    pub derivs: Vec<DMatrix<f64>>,
    pub range_ok: Vec<bool>,
    pub min_eig_upsilon_bar: f64,
}

#[derive(Debug, Clone)]
pub struct PhiTrajectory {
    pub values: Vec<DVector<f64>>,
    /// `dphi/dt` at every node.
    pub derivs: Vec<DVector<f64>>,
}

/// Integrate the symmetric Riccati equation backward from `P(T) = H`.
#[allow(non_snake_case)]
pub fn solve_P(params: &ModelParams, grid: &TimeGrid, policy: RangePolicy) -> Result<PTrajectory> {
    terminal_time(params, grid)?;
    let steps = grid.steps();
    let mut values = vec![DMatrix::zeros(0, 0); steps + 1];
    let mut derivs = values.clone();
    let mut range_ok = vec![true; steps + 1];
    let mut min_eig_upsilon = f64::INFINITY;
    values[steps] = params.h.clone();
    let bt = params.b.transpose();

    for k in (0..=steps).rev() {
        if k < steps {
            let next = rk4_back(&values[k + 1], grid.node(k + 1), grid.node(k), |_, _, p| {
                -p_rhs(params, p)
            });
            let next = linalg::symmetrize(&next);
            if escaped(&next) {
                return Err(Error::HorizonEscape {
                    equation: "P",
                    time: grid.node(k),
                });
            }
            values[k] = next;
        }
        let p = &values[k];
        derivs[k] = -p_rhs(params, p);
        let (ups, _) = upsilon_phi(params, p);
        let req = [
            bt.clone(),
            params.d.transpose() * p,
            params.d0.transpose() * p,
        ];
        let chk = check_weight("Upsilon", &ups, &req, grid.node(k), policy)?;
        range_ok[k] = chk.ok;
        min_eig_upsilon = min_eig_upsilon.min(chk.min_eig);
    }
    Ok(PTrajectory {
        values,
        derivs,
        range_ok,
        min_eig_upsilon,
    })
}

/// Integrate the non-symmetric Riccati equation backward from
/// `K(T) = -H Gamma0`, reading `P` at midpoints by cubic Hermite
/// interpolation of the stored trajectory.
#[allow(non_snake_case)]
pub fn solve_K(
    params: &ModelParams,
    grid: &TimeGrid,
    p: &PTrajectory,
    policy: RangePolicy,
) -> Result<KTrajectory> {
    terminal_time(params, grid)?;
    let steps = grid.steps();
    if p.values.len() != steps + 1 {
        return Err(Error::GridMismatch("P trajectory length differs from grid".into()));
    }
    let mut values = vec![DMatrix::zeros(0, 0); steps + 1];
    let mut derivs = values.clone();
    let mut range_ok = vec![true; steps + 1];
    let mut min_eig = f64::INFINITY;
    values[steps] = -(&params.h * &params.gamma0);
    let bt = params.b.transpose();

    for k in (0..=steps).rev() {
        if k < steps {
            let h = grid.node(k + 1) - grid.node(k);
            let p_mid = hermite_mid(&p.values[k], &p.values[k + 1], &p.derivs[k], &p.derivs[k + 1], h);
            let stage_p = [&p.values[k + 1], &p_mid, &p.values[k]];
            let next = rk4_back(&values[k + 1], grid.node(k + 1), grid.node(k), |s, _, kk| {
                -k_rhs(params, stage_p[s], kk)
            });
            if escaped(&next) {
                return Err(Error::HorizonEscape {
                    equation: "K",
                    time: grid.node(k),
                });
            }
            values[k] = next;
        }
        let (pk, kk) = (&p.values[k], &values[k]);
        let zero = DVector::zeros(params.n());
        let b = bundle(pk, kk, &zero, &zero, params, grid.node(k));
        derivs[k] = -k_rhs_from(params, pk, kk, &b);
        let req = [
            bt.clone(),
            params.d.transpose() * pk,
            params.d0.transpose() * (pk + kk),
        ];
        let chk = check_weight("Upsilon-bar", &b.upsilon_bar, &req, grid.node(k), policy)?;
        range_ok[k] = chk.ok;
        min_eig = min_eig.min(chk.min_eig);
    }
    Ok(KTrajectory {
        values,
        derivs,
        range_ok,
        min_eig_upsilon_bar: min_eig,
    })
}

/// Integrate the linear offset equation backward from `phi(T) = -H eta0`.
pub fn solve_phi(
    params: &ModelParams,
    grid: &TimeGrid,
    p: &PTrajectory,
    k: &KTrajectory,
) -> Result<PhiTrajectory> {
    terminal_time(params, grid)?;
    let steps = grid.steps();
    if p.values.len() != steps + 1 || k.values.len() != steps + 1 {
        return Err(Error::GridMismatch("P or K trajectory length differs from grid".into()));
    }
    let mut values = vec![DVector::zeros(0); steps + 1];
    let mut derivs = values.clone();
    values[steps] = -(&params.h * &params.terminal_target);

    for i in (0..=steps).rev() {
        if i < steps {
            let h = grid.node(i + 1) - grid.node(i);
            let p_mid = hermite_mid(&p.values[i], &p.values[i + 1], &p.derivs[i], &p.derivs[i + 1], h);
            let k_mid = hermite_mid(&k.values[i], &k.values[i + 1], &k.derivs[i], &k.derivs[i + 1], h);
            let stage_p = [&p.values[i + 1], &p_mid, &p.values[i]];
            let stage_k = [&k.values[i + 1], &k_mid, &k.values[i]];
            let next = rk4_back(&values[i + 1], grid.node(i + 1), grid.node(i), |s, t, y| {
                -phi_rhs(params, stage_p[s], stage_k[s], y, t)
            });
            if !next.iter().all(|x| x.is_finite()) || next.norm() > BLOW_UP_NORM {
                return Err(Error::HorizonEscape {
                    equation: "phi",
                    time: grid.node(i),
                });
            }
            values[i] = next;
        }
        derivs[i] = -phi_rhs(params, &p.values[i], &k.values[i], &values[i], grid.node(i));
    }
    Ok(PhiTrajectory { values, derivs })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiccatiDiagnostics {
    /// Largest Frobenius gap between a fourth-order central difference of
    /// the stored trajectory and its right-hand side, over interior nodes.
    pub max_residual_p: f64,
    pub max_residual_k: f64,
    pub max_residual_phi: f64,
    pub max_asymmetry_p: f64,
    pub min_eig_p: f64,
    pub min_eig_upsilon: f64,
    pub min_eig_upsilon_bar: f64,
}

/// Solution of the backward system on a grid. `psi` vanishes identically
/// for deterministic offsets and is not stored.
#[derive(Debug, Clone)]
pub struct RiccatiSolution {
    pub grid: TimeGrid,
    pub p: Vec<DMatrix<f64>>,
    pub k: Vec<DMatrix<f64>>,
    pub phi: Vec<DVector<f64>>,
    /// Range and positivity conditions on Upsilon and Upsilon-bar per node.
    pub range_ok: Vec<bool>,
    pub diagnostics: RiccatiDiagnostics,
}

impl RiccatiSolution {
    pub fn psi(&self, _node: usize) -> DVector<f64> {
        DVector::zeros(self.phi[0].len())
    }

    pub fn bundle_at(&self, params: &ModelParams, node: usize) -> CoefficientBundle {
        bundle(
            &self.p[node],
            &self.k[node],
            &self.phi[node],
            &self.psi(node),
            params,
            self.grid.node(node),
        )
    }
}

fn fd_residual_mat(values: &[DMatrix<f64>], derivs: &[DMatrix<f64>], h: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for k in 2..values.len().saturating_sub(2) {
        let fd = (&values[k - 2] - &values[k - 1] * 8.0 + &values[k + 1] * 8.0 - &values[k + 2])
            / (12.0 * h);
        worst = worst.max((fd - &derivs[k]).norm());
    }
    worst
}

fn fd_residual_vec(values: &[DVector<f64>], derivs: &[DVector<f64>], h: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for k in 2..values.len().saturating_sub(2) {
        let fd = (&values[k - 2] - &values[k - 1] * 8.0 + &values[k + 1] * 8.0 - &values[k + 2])
            / (12.0 * h);
        worst = worst.max((fd - &derivs[k]).norm());
    }
    worst
}

/// Solve for `P`, `K` and `phi` on `grid` and collect diagnostics.
pub fn solve_riccati(
    params: &ModelParams,
    grid: &TimeGrid,
    policy: RangePolicy,
) -> Result<RiccatiSolution> {
    let p = solve_P(params, grid, policy)?;
    let k = solve_K(params, grid, &p, policy)?;
    let phi = solve_phi(params, grid, &p, &k)?;
    let h = grid.dt();
    let diagnostics = RiccatiDiagnostics {
        max_residual_p: fd_residual_mat(&p.values, &p.derivs, h),
        max_residual_k: fd_residual_mat(&k.values, &k.derivs, h),
        max_residual_phi: fd_residual_vec(&phi.values, &phi.derivs, h),
        max_asymmetry_p: p.values.iter().map(linalg::asymmetry).fold(0.0, f64::max),
        min_eig_p: p
            .values
            .iter()
            .map(linalg::min_sym_eigenvalue)
            .fold(f64::INFINITY, f64::min),
        min_eig_upsilon: p.min_eig_upsilon,
        min_eig_upsilon_bar: k.min_eig_upsilon_bar,
    };
    let range_ok = p
        .range_ok
        .iter()
        .zip(&k.range_ok)
        .map(|(a, b)| *a && *b)
        .collect();
    Ok(RiccatiSolution {
        grid: *grid,
        p: p.values,
        k: k.values,
        phi: phi.values,
        range_ok,
        diagnostics,
    })
}
