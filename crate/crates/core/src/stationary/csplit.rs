//! The equation for `Pi = P + K` via its Hamiltonian-type matrix.
//!
//! With `D0 = 0` and `C0 = k I` (variant a) or `C0 + F0 = j I` (variant b),
//! the equation for `Pi` reads
//! `Pi M11 + Pi M12 Pi - M22 Pi - M21 = 0`, and its stabilizing solution
//! spans the stable invariant subspace of `[[M11, M12], [M21, M22]]`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use super::schur::ordered_schur;
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::ModelParams;

/// Real parts within this distance of zero count as on the imaginary axis.
pub const AXIS_TOL: f64 = 1e-10;

/// Largest tolerated condition number of the top block `X1`.
pub const MAX_SUBSPACE_COND: f64 = 1e12;

/// Largest accepted Frobenius residual of the `Pi` equation.
pub const PI_RESIDUAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// `C0 = k I`, `D0 = 0`.
    A,
    /// `C0 + F0 = j I`, `D0 = 0`.
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EigenSplit {
    pub stable: usize,
    pub unstable: usize,
    pub boundary: usize,
}

#[derive(Debug, Clone)]
pub struct CSplittingMatrix {
    pub m: DMatrix<f64>,
    pub variant: Variant,
    /// The scalar `k` (variant a) or `j` (variant b).
    pub scalar: f64,
    pub eigen_split: EigenSplit,
    pub eigenvalues: Vec<Complex64>,
}

impl CSplittingMatrix {
    pub fn n(&self) -> usize {
        self.m.nrows() / 2
    }

    pub fn is_splitting(&self) -> bool {
        let n = self.n();
        self.eigen_split.boundary == 0 && self.eigen_split.stable == n && self.eigen_split.unstable == n
    }

    fn block(&self, i: usize, j: usize) -> DMatrix<f64> {
        let n = self.n();
        self.m.view((i * n, j * n), (n, n)).into_owned()
    }

    /// Frobenius norm of `Pi M11 + Pi M12 Pi - M22 Pi - M21`.
    pub fn residual(&self, pi: &DMatrix<f64>) -> f64 {
        self.residual_matrix(pi).norm()
    }

    fn residual_matrix(&self, pi: &DMatrix<f64>) -> DMatrix<f64> {
        let (m11, m12, m21, m22) = (self.block(0, 0), self.block(0, 1), self.block(1, 0), self.block(1, 1));
        pi * &m11 + pi * &m12 * pi - &m22 * pi - m21
    }

    /// `M11 + M12 Pi`, the closed loop that a stabilizing `Pi` makes Hurwitz.
    pub fn closed_loop(&self, pi: &DMatrix<f64>) -> DMatrix<f64> {
        self.block(0, 0) + self.block(0, 1) * pi
    }
}

fn scalar_multiple_of_identity(m: &DMatrix<f64>) -> Option<f64> {
    let s = m[(0, 0)];
    let tol = 1e-12 * s.abs().max(1.0);
    let n = m.nrows();
    let ok = (0..n).all(|i| {
        (0..n).all(|j| {
            let want = if i == j { s } else { 0.0 };
            (m[(i, j)] - want).abs() <= tol
        })
    });
    ok.then_some(s)
}

/// The variant whose structural hypotheses `params` satisfies, preferring
/// variant a.
pub fn detect_variant(params: &ModelParams) -> Option<Variant> {
    if params.d0.amax() != 0.0 {
        return None;
    }
    if scalar_multiple_of_identity(&params.c0).is_some() {
        Some(Variant::A)
    } else if scalar_multiple_of_identity(&(&params.c0 + &params.f0)).is_some() {
        Some(Variant::B)
    } else {
        None
    }
}

fn split_counts(eigs: &[Complex64]) -> EigenSplit {
    let mut s = EigenSplit {
        stable: 0,
        unstable: 0,
        boundary: 0,
    };
    for z in eigs {
        if z.re < -AXIS_TOL {
            s.stable += 1;
        } else if z.re > AXIS_TOL {
            s.unstable += 1;
        } else {
            s.boundary += 1;
        }
    }
    s
}

/// Assemble the `2n x 2n` matrix of the requested variant.
pub fn build_csplitting(
    params: &ModelParams,
    p: &DMatrix<f64>,
    variant: Variant,
) -> Result<CSplittingMatrix> {
    let n = params.n();
    if params.d0.amax() != 0.0 {
        return Err(Error::Precondition("c-splitting needs D0 = 0".into()));
    }
    let scalar = match variant {
        Variant::A => scalar_multiple_of_identity(&params.c0)
            .ok_or_else(|| Error::Precondition("variant a needs C0 = k I".into()))?,
        Variant::B => scalar_multiple_of_identity(&(&params.c0 + &params.f0))
            .ok_or_else(|| Error::Precondition("variant b needs C0 + F0 = j I".into()))?,
    };
    let dt = params.d.transpose();
    let bt = params.b.transpose();
    let ut = &params.r + &dt * p * &params.d;
    let ut_inv = linalg::inverse(&ut, "R + D^T P D")?;
    let cf = &params.c + &params.f;
    let ct_p = params.c.transpose() * p;
    let dt_p_cf = &dt * p * &cf;
    let eye = DMatrix::<f64>::identity(n, n);

    let mut m11 = &params.a + &params.g - &params.b * &ut_inv * &dt_p_cf;
    let m12 = -(&params.b * &ut_inv * &bt);
    let m21 = &ct_p * &params.d * &ut_inv * &dt_p_cf - &ct_p * &cf - &params.q * (&eye - &params.gamma);
    let mut m22 = -params.a.transpose() + &ct_p * &params.d * &ut_inv * &bt;
    match variant {
        Variant::A => m11 += (&params.c0 + &params.f0) * scalar,
        Variant::B => m22 -= params.c0.transpose() * scalar,
    }

    let mut m = DMatrix::zeros(2 * n, 2 * n);
    m.view_mut((0, 0), (n, n)).copy_from(&m11);
    m.view_mut((0, n), (n, n)).copy_from(&m12);
    m.view_mut((n, 0), (n, n)).copy_from(&m21);
    m.view_mut((n, n), (n, n)).copy_from(&m22);
    let eigenvalues = linalg::eigenvalues(&m)?;
    let eigen_split = split_counts(&eigenvalues);
    Ok(CSplittingMatrix {
        m,
        variant,
        scalar,
        eigen_split,
        eigenvalues,
    })
}

/// One Newton step on the `Pi` equation: solve the Sylvester equation
/// `Delta (M11 + M12 Pi) + (Pi M12 - M22) Delta = -residual`.
fn newton_step(cs: &CSplittingMatrix, pi: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = cs.n();
    let eye = DMatrix::identity(n, n);
    let closed = cs.closed_loop(pi);
    let left = pi * cs.block(0, 1) - cs.block(1, 1);
    let op = linalg::kron(&closed.transpose(), &eye) + linalg::kron(&eye, &left);
    let rhs = -linalg::vec_of(&cs.residual_matrix(pi));
    let delta = op.lu().solve(&rhs)?;
    Some(pi + linalg::unvec(&delta, n, n))
}

/// Stabilizing solution of the `Pi` equation from the stable invariant
/// subspace `[X1; X2]` of the c-splitting matrix, `Pi = X2 X1^{-1}`.
#[allow(non_snake_case)]
pub fn solve_Pi(params: &ModelParams, p: &DMatrix<f64>, variant: Variant) -> Result<DMatrix<f64>> {
    let cs = build_csplitting(params, p, variant)?;
    solve_pi_from(&cs)
}

pub fn solve_pi_from(cs: &CSplittingMatrix) -> Result<DMatrix<f64>> {
    let n = cs.n();
    if !cs.is_splitting() {
        return Err(Error::NoSplitting {
            stable: cs.eigen_split.stable,
            unstable: cs.eigen_split.unstable,
            boundary: cs.eigen_split.boundary,
        });
    }
    let os = ordered_schur(&cs.m, |z| z.re < 0.0)?;
    if os.selected != n {
        return Err(Error::NoSplitting {
            stable: os.selected,
            unstable: 2 * n - os.selected,
            boundary: 0,
        });
    }
    let x1 = os.q.view((0, 0), (n, n)).into_owned();
    let x2 = os.q.view((n, 0), (n, n)).into_owned();
    let sv = x1.clone().singular_values();
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(cond <= MAX_SUBSPACE_COND) {
        return Err(Error::SubspaceDegenerate(cond));
    }
    let x1_inv = x1
        .try_inverse()
        .ok_or(Error::SubspaceDegenerate(f64::INFINITY))?;
    let pi_c = x2 * x1_inv;
    let scale = pi_c.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let imag = pi_c.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    if imag > 1e-8 * scale {
        return Err(Error::Numerical(format!(
            "stable subspace gives a complex Pi (imaginary part {imag:.3e})"
        )));
    }
    let mut pi = pi_c.map(|z| z.re);

    // Polish: the subspace route is accurate to roughly cond * eps.
    for _ in 0..3 {
        let r0 = cs.residual(&pi);
        if r0 <= 1e-14 * scale {
            break;
        }
        match newton_step(cs, &pi) {
            Some(next) if cs.residual(&next) < r0 => pi = next,
            _ => break,
        }
    }

    let residual = cs.residual(&pi);
    if residual > PI_RESIDUAL_TOL {
        return Err(Error::Inconsistent {
            equation: "Pi",
            residual,
        });
    }
    if !linalg::is_hurwitz(&cs.closed_loop(&pi), 0.0)? {
        return Err(Error::NotStabilizing(
            "closed loop of the Pi equation is not Hurwitz".into(),
        ));
    }
    Ok(pi)
}
