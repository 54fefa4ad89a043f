//! Problem data for the N-agent linear-quadratic game with common noise.
//!
//! Agent `i` follows
//!
//! ```text
//! dx_i = [A x_i + B u_i + G x^N + f(t)] dt
//!      + [C x_i + D u_i + F x^N + sigma(t)] dW_i
//!      + [C0 x_i + D0 u_i + F0 x^N + sigma0(t)] dW_0
//! ```
//!
//! with `x^N` the population average, and minimizes
//!
//! ```text
//! E { int_0^T |x_i - Gamma x^N - eta|_Q^2 + |u_i|_R^2 dt + |x_i(T) - Gamma0 x^N(T) - eta0|_H^2 }.
//! ```
//!
//! Coefficient matrices are time-invariant; the offsets `f, sigma, sigma0,
//! eta` are deterministic functions of time.

mod config;
mod init;
pub mod presets;
mod signal;
mod transform;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;

pub use config::{
    apply_override, ComponentSpec, DimsSpec, HorizonSpec, MatrixSpec, ModelConfig, SignalSpec,
    SignalsSpec, SimulationSpec, TransformsSpec,
};
pub use init::InitLaw;
pub use signal::{ScalarSignal, Signal};
pub use transform::{cross_term_transform, discount_transform, ControlShift};

/// Largest asymmetry of Q, R, H repaired silently on ingest.
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Dims {
    /// State dimension.
    pub n: usize,
    /// Control dimension.
    pub r: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Horizon {
    Finite(f64),
    Infinite,
}

impl Horizon {
    pub fn end(self) -> Option<f64> {
        match self {
            Horizon::Finite(t) => Some(t),
            Horizon::Infinite => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Horizon::Finite(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub dims: Dims,
    pub horizon: Horizon,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub f: DMatrix<f64>,
    pub c0: DMatrix<f64>,
    pub d0: DMatrix<f64>,
    pub f0: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub gamma: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub gamma0: DMatrix<f64>,
    /// Drift offset `f(t)`.
    pub drift_offset: Signal,
    /// Idiosyncratic diffusion offset `sigma(t)`.
    pub noise_offset: Signal,
    /// Common-noise diffusion offset `sigma0(t)`.
    pub common_noise_offset: Signal,
    /// Running tracking target `eta(t)`.
    pub target: Signal,
    /// Terminal tracking target `eta0`.
    pub terminal_target: DVector<f64>,
    pub init_law: InitLaw,
    /// Mean of the initial law.
    pub init_mean: DVector<f64>,
}

impl ModelParams {
    /// A model of the given size with every coefficient, weight and offset
    /// zero, a unit control weight and deterministic zero initial state.
    pub fn zeros(n: usize, r: usize, horizon: Horizon) -> Self {
        let z = || DMatrix::zeros(n, n);
        let zr = || DMatrix::zeros(n, r);
        ModelParams {
            dims: Dims { n, r },
            horizon,
            a: z(),
            b: zr(),
            g: z(),
            c: z(),
            d: zr(),
            f: z(),
            c0: z(),
            d0: zr(),
            f0: z(),
            q: z(),
            r: DMatrix::identity(r, r),
            gamma: z(),
            h: z(),
            gamma0: z(),
            drift_offset: Signal::zero(n),
            noise_offset: Signal::zero(n),
            common_noise_offset: Signal::zero(n),
            target: Signal::zero(n),
            terminal_target: DVector::zeros(n),
            init_law: InitLaw::Dirac {
                point: vec![0.0; n],
            },
            init_mean: DVector::zeros(n),
        }
    }

    pub fn n(&self) -> usize {
        self.dims.n
    }

    pub fn r_dim(&self) -> usize {
        self.dims.r
    }

    /// Replace the initial law and keep `init_mean` consistent with it.
    pub fn with_init_law(mut self, law: InitLaw) -> Self {
        self.init_mean = law.mean();
        self.init_law = law;
        self
    }

    /// True when every offset signal is constant in time.
    pub fn has_constant_offsets(&self) -> bool {
        self.drift_offset.is_constant()
            && self.noise_offset.is_constant()
            && self.common_noise_offset.is_constant()
            && self.target.is_constant()
    }

    fn matrices(&self) -> [(&'static str, &DMatrix<f64>, usize, usize); 14] {
        let (n, r) = (self.dims.n, self.dims.r);
        [
            ("A", &self.a, n, n),
            ("B", &self.b, n, r),
            ("G", &self.g, n, n),
            ("C", &self.c, n, n),
            ("D", &self.d, n, r),
            ("F", &self.f, n, n),
            ("C0", &self.c0, n, n),
            ("D0", &self.d0, n, r),
            ("F0", &self.f0, n, n),
            ("Q", &self.q, n, n),
            ("R", &self.r, r, r),
            ("Gamma", &self.gamma, n, n),
            ("H", &self.h, n, n),
            ("Gamma0", &self.gamma0, n, n),
        ]
    }

    /// Shape and finiteness checks. Errors name the offending field.
    pub fn check_shapes(&self) -> Result<()> {
        let (n, r) = (self.dims.n, self.dims.r);
        if n == 0 || r == 0 {
            return Err(Error::InvalidParameter {
                name: "dims",
                reason: format!("need n >= 1 and r >= 1, got n = {n}, r = {r}"),
            });
        }
        for (name, m, rows, cols) in self.matrices() {
            if m.shape() != (rows, cols) {
                return Err(Error::Dimension {
                    name,
                    expected: format!("{rows}x{cols}"),
                    got: format!("{}x{}", m.nrows(), m.ncols()),
                });
            }
            if !linalg::all_finite(m) {
                return Err(Error::NonFinite(name));
            }
        }
        self.drift_offset.check("f", n)?;
        self.noise_offset.check("sigma", n)?;
        self.common_noise_offset.check("sigma0", n)?;
        self.target.check("eta", n)?;
        if self.terminal_target.len() != n {
            return Err(Error::Dimension {
                name: "eta0",
                expected: format!("{n}"),
                got: format!("{}", self.terminal_target.len()),
            });
        }
        if !self.terminal_target.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite("eta0"));
        }
        self.init_law.check(n)?;
        if self.init_mean.len() != n || !self.init_mean.iter().all(|x| x.is_finite()) {
            return Err(Error::Dimension {
                name: "init_mean",
                expected: format!("{n} finite components"),
                got: format!("{} components", self.init_mean.len()),
            });
        }
        if let Horizon::Finite(t) = self.horizon {
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::InvalidParameter {
                    name: "horizon",
                    reason: format!("finite horizon must be positive, got {t}"),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckStatus {
    Pass,
    Fail,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub status: CheckStatus,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConvexityCertificate {
    /// Q, R, H are all positive semidefinite.
    SufficientConditionPass,
    /// Some weight is indefinite; convexity has to be probed numerically.
    MustProbe,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
    pub convexity: ConvexityCertificate,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != CheckStatus::Fail)
    }

    pub fn status(&self, name: &str) -> Option<CheckStatus> {
        self.checks.iter().find(|c| c.name == name).map(|c| c.status)
    }
}

/// Validate the standing assumptions and symmetrize the weights in place.
///
/// Q, R and H are replaced by `(M + M^T)/2`; an asymmetry above
/// [`SYMMETRY_TOL`] is an error rather than something to repair. Nothing else
/// is modified.
pub fn validate_model(params: &mut ModelParams) -> Result<ValidationReport> {
    params.check_shapes()?;

    for (name, m) in [("Q", &mut params.q), ("R", &mut params.r), ("H", &mut params.h)] {
        let asym = linalg::asymmetry(m);
        if asym > SYMMETRY_TOL {
            return Err(Error::Asymmetric {
                name,
                asymmetry: asym,
            });
        }
        *m = linalg::symmetrize(m);
    }

    let mut checks = vec![
        Check {
            name: "dimensions",
            status: CheckStatus::Pass,
            detail: format!("n = {}, r = {}", params.dims.n, params.dims.r),
        },
        Check {
            name: "symmetry",
            status: CheckStatus::Pass,
            detail: "Q, R, H symmetric".into(),
        },
    ];

    let mean_gap = (&params.init_mean - params.init_law.mean()).amax();
    checks.push(Check {
        name: "initial-law",
        status: if mean_gap <= 1e-12 {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        },
        detail: format!("i.i.d. draws with finite second moment; |mean - init_mean| = {mean_gap:.3e}"),
    });

    let eq = linalg::min_sym_eigenvalue(&params.q);
    let er = linalg::min_sym_eigenvalue(&params.r);
    let eh = linalg::min_sym_eigenvalue(&params.h);
    let psd_tol = 1e-12;
    let convexity = if eq >= -psd_tol && er >= -psd_tol && eh >= -psd_tol {
        ConvexityCertificate::SufficientConditionPass
    } else {
        ConvexityCertificate::MustProbe
    };
    checks.push(Check {
        name: "convexity",
        status: match convexity {
            ConvexityCertificate::SufficientConditionPass => CheckStatus::Pass,
            ConvexityCertificate::MustProbe => CheckStatus::Unknown,
        },
        detail: format!(
            "min eig Q = {eq:.3e}, R = {er:.3e}, H = {eh:.3e}{}",
            if convexity == ConvexityCertificate::MustProbe {
                "; indefinite weight, convexity must be probed"
            } else {
                ""
            }
        ),
    });

    if params.horizon == Horizon::Infinite {
        let ok = eq >= -psd_tol && er > 0.0;
        checks.push(Check {
            name: "infinite-horizon-weights",
            status: if ok {
                CheckStatus::Pass
            } else {
                CheckStatus::Fail
            },
            detail: format!("need Q >= 0 and R > 0; min eig Q = {eq:.3e}, R = {er:.3e}"),
        });
    }

    Ok(ValidationReport { checks, convexity })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_preset_validates_with_sufficient_convexity() {
        let mut p = presets::paper_sec4();
        let report = validate_model(&mut p).unwrap();
        assert!(report.passed());
        assert_eq!(report.convexity, ConvexityCertificate::SufficientConditionPass);
    }

    #[test]
    fn zero_weights_pass_trivially() {
        let mut p = ModelParams::zeros(2, 1, Horizon::Finite(1.0));
        p.r = DMatrix::zeros(1, 1);
        let report = validate_model(&mut p).unwrap();
        assert!(report.passed());
        assert_eq!(report.convexity, ConvexityCertificate::SufficientConditionPass);
    }

    #[test]
    fn wrong_shape_names_matrix() {
        let mut p = ModelParams::zeros(2, 1, Horizon::Finite(1.0));
        p.b = DMatrix::zeros(2, 2);
        match validate_model(&mut p) {
            Err(Error::Dimension { name, .. }) => assert_eq!(name, "B"),
            other => panic!("expected dimension error, got {other:?}"),
        }
    }

    #[test]
    fn non_finite_entry_is_rejected() {
        let mut p = ModelParams::zeros(2, 1, Horizon::Finite(1.0));
        p.g[(1, 0)] = f64::NAN;
        assert!(matches!(validate_model(&mut p), Err(Error::NonFinite("G"))));
    }

    #[test]
    fn tiny_asymmetry_is_repaired_exactly() {
        let mut p = ModelParams::zeros(2, 1, Horizon::Finite(1.0));
        p.q = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3 + 1e-14, 1.0]);
        validate_model(&mut p).unwrap();
        assert_eq!(p.q, p.q.transpose());
    }

    #[test]
    fn large_asymmetry_is_an_error() {
        let mut p = ModelParams::zeros(2, 1, Horizon::Finite(1.0));
        p.h = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.2, 1.0]);
        assert!(matches!(
            validate_model(&mut p),
            Err(Error::Asymmetric { name: "H", .. })
        ));
    }

    #[test]
    fn indefinite_weight_requests_probe() {
        let mut p = presets::sticky_price();
        let report = validate_model(&mut p).unwrap();
        assert_eq!(report.convexity, ConvexityCertificate::MustProbe);
        assert_eq!(report.status("convexity"), Some(CheckStatus::Unknown));
    }

    #[test]
    fn infinite_horizon_needs_positive_control_weight() {
        let mut p = ModelParams::zeros(1, 1, Horizon::Infinite);
        p.r = DMatrix::zeros(1, 1);
        let report = validate_model(&mut p).unwrap();
        assert_eq!(report.status("infinite-horizon-weights"), Some(CheckStatus::Fail));
        assert!(!report.passed());
    }
}
