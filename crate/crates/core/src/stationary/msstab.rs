use nalgebra::DMatrix;

use crate::linalg;

/// Real parts at or above `-MS_MARGIN` count as not mean-square stable.
pub const MS_MARGIN: f64 = 1e-12;

/// Matrix of `X -> A X + X A^T + C X C^T + C0 X C0^T` acting on `vec(X)`.
pub fn second_moment_generator(
    a: &DMatrix<f64>,
    c: &DMatrix<f64>,
    c0: &DMatrix<f64>,
) -> DMatrix<f64> {
    let n = a.nrows();
    let eye = DMatrix::identity(n, n);
    linalg::kron(&eye, a) + linalg::kron(a, &eye) + linalg::kron(c, c) + linalg::kron(c0, c0)
}

/// Mean-square stability of `dx = A x dt + C x dW + C0 x dW0`.
///
/// Scalar systems use the exact sign test `2a + c^2 + c0^2 < 0`; larger
/// systems require every eigenvalue of the second-moment generator to have
/// real part below `-MS_MARGIN`.
pub fn ms_stable(a: &DMatrix<f64>, c: &DMatrix<f64>, c0: &DMatrix<f64>) -> bool {
    if a.nrows() == 1 {
        let (a, c, c0) = (a[(0, 0)], c[(0, 0)], c0[(0, 0)]);
        return 2.0 * a + c * c + c0 * c0 < 0.0;
    }
    match linalg::spectral_abscissa(&second_moment_generator(a, c, c0)) {
        Ok(s) => s < -MS_MARGIN,
        Err(_) => false,
    }
}
