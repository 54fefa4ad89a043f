//! Ordered complex Schur decomposition and stable invariant subspaces.

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Unitary `Q` and upper-triangular `T` with `M = Q T Q^H`, where the first
/// `k` diagonal entries of `T` are exactly the eigenvalues selected by
/// `select`.
pub struct OrderedSchur {
    pub q: DMatrix<Complex64>,
    pub t: DMatrix<Complex64>,
    pub selected: usize,
}

/// Swap the diagonal entries at `k` and `k + 1` with a unitary rotation.
fn swap_adjacent(t: &mut DMatrix<Complex64>, q: &mut DMatrix<Complex64>, k: usize) {
    let t11 = t[(k, k)];
    let t22 = t[(k + 1, k + 1)];
    let t12 = t[(k, k + 1)];
    let diff = t22 - t11;
    let r = (t12.norm_sqr() + diff.norm_sqr()).sqrt();
    if r == 0.0 {
        return;
    }
    // First column is the eigenvector of the 2x2 block for t22.
    let a = t12 / r;
    let b = diff / r;
    let n = t.nrows();
    // Rows k, k+1: T <- Z^H T.
    for j in 0..n {
        let x = t[(k, j)];
        let y = t[(k + 1, j)];
        t[(k, j)] = a.conj() * x + b.conj() * y;
        t[(k + 1, j)] = -b * x + a * y;
    }
    // Columns k, k+1: T <- T Z and Q <- Q Z.
    for m in [&mut *t, &mut *q] {
        for i in 0..m.nrows() {
            let x = m[(i, k)];
            let y = m[(i, k + 1)];
            m[(i, k)] = a * x + b * y;
            m[(i, k + 1)] = -b.conj() * x + a.conj() * y;
        }
    }
    t[(k + 1, k)] = Complex64::new(0.0, 0.0);
}

/// Complex Schur form of the real matrix `m` with the eigenvalues chosen by
/// `select` moved to the leading block.
pub fn ordered_schur(m: &DMatrix<f64>, select: impl Fn(Complex64) -> bool) -> Result<OrderedSchur> {
    let mc = m.map(|x| Complex64::new(x, 0.0));
    let schur = Schur::try_new(mc, f64::EPSILON, 100_000)
        .ok_or_else(|| Error::Numerical("complex Schur iteration did not converge".into()))?;
    let (mut q, mut t) = schur.unpack();
    let n = t.nrows();
    for i in 0..n {
        for j in 0..i {
            t[(i, j)] = Complex64::new(0.0, 0.0);
        }
    }
    let mut selected = 0;
    for j in 0..n {
        if select(t[(j, j)]) {
            let mut pos = j;
            while pos > selected {
                swap_adjacent(&mut t, &mut q, pos - 1);
                pos -= 1;
            }
            selected += 1;
        }
    }
    Ok(OrderedSchur { q, t, selected })
}
