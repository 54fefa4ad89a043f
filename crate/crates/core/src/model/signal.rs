//! Deterministic time signals for the offset terms of the state equation and
//! the tracking targets.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// One scalar component of a [`Signal`].
#[derive(Debug, Clone, PartialEq)]
pub enum ScalarSignal {
    /// `c`
    Constant { value: f64 },
    /// `c0 + c1 t + c2 t^2 + ...`
    Polynomial { coeffs: Vec<f64> },
    /// `amplitude * sin(frequency * t + phase) + offset`
    Sinusoid {
        amplitude: f64,
        frequency: f64,
        phase: f64,
        offset: f64,
    },
    /// `scale * t^exponent`, taken as 0 at `t = 0` when `exponent > 0`.
    PowerLaw { scale: f64, exponent: f64 },
    /// Piecewise-linear interpolation through `(times[k], values[k])`,
    /// held constant outside the table.
    Tabulated { times: Vec<f64>, values: Vec<f64> },
}

impl ScalarSignal {
    pub fn zero() -> Self {
        ScalarSignal::Constant { value: 0.0 }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            ScalarSignal::Constant { value } => *value,
            ScalarSignal::Polynomial { coeffs } => {
                coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
            }
            ScalarSignal::Sinusoid {
                amplitude,
                frequency,
                phase,
                offset,
            } => amplitude * (frequency * t + phase).sin() + offset,
            ScalarSignal::PowerLaw { scale, exponent } => {
                if t == 0.0 && *exponent > 0.0 {
                    0.0
                } else {
                    scale * t.powf(*exponent)
                }
            }
            ScalarSignal::Tabulated { times, values } => {
                let k = times.partition_point(|&s| s <= t);
                if k == 0 {
                    values[0]
                } else if k == times.len() {
                    values[values.len() - 1]
                } else {
                    let (t0, t1) = (times[k - 1], times[k]);
                    let w = (t - t0) / (t1 - t0);
                    values[k - 1] * (1.0 - w) + values[k] * w
                }
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            ScalarSignal::Constant { .. } => true,
            ScalarSignal::Polynomial { coeffs } => coeffs.iter().skip(1).all(|&c| c == 0.0),
            ScalarSignal::Sinusoid { amplitude, .. } => *amplitude == 0.0,
            ScalarSignal::PowerLaw { scale, exponent } => *scale == 0.0 || *exponent == 0.0,
            ScalarSignal::Tabulated { values, .. } => values.windows(2).all(|w| w[0] == w[1]),
        }
    }

    fn check(&self, name: &'static str) -> Result<()> {
        let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        let ok = match self {
            ScalarSignal::Constant { value } => value.is_finite(),
            ScalarSignal::Polynomial { coeffs } => finite(coeffs),
            ScalarSignal::Sinusoid {
                amplitude,
                frequency,
                phase,
                offset,
            } => finite(&[*amplitude, *frequency, *phase, *offset]),
            ScalarSignal::PowerLaw { scale, exponent } => finite(&[*scale, *exponent]),
            ScalarSignal::Tabulated { times, values } => {
                if times.is_empty() || times.len() != values.len() {
                    return Err(Error::InvalidParameter {
                        name,
                        reason: "tabulated signal needs equally many times and values".into(),
                    });
                }
                if times.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::InvalidParameter {
                        name,
                        reason: "tabulated signal times must be strictly increasing".into(),
                    });
                }
                finite(times) && finite(values)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::NonFinite(name))
        }
    }
}

/// Vector-valued deterministic signal `s(t) in R^n`.
///
/// Besides plain per-component definitions, signals can be linear
/// combinations `sum_k M_k s_k(t)` and can carry an exponential factor
/// `exp(-rate t)`; both arise from the model-reduction transforms.
#[derive(Debug, Clone, PartialEq)]
pub enum Signal {
    Components(Vec<ScalarSignal>),
    Combination(Vec<(DMatrix<f64>, Signal)>),
    Discounted { rate: f64, inner: Box<Signal> },
}

impl Signal {
    pub fn zero(n: usize) -> Self {
        Signal::Components(vec![ScalarSignal::zero(); n])
    }

    pub fn constant(values: &[f64]) -> Self {
        Signal::Components(
            values
                .iter()
                .map(|&value| ScalarSignal::Constant { value })
                .collect(),
        )
    }

    pub fn dim(&self) -> usize {
        match self {
            Signal::Components(c) => c.len(),
            Signal::Combination(terms) => terms.first().map_or(0, |(m, _)| m.nrows()),
            Signal::Discounted { inner, .. } => inner.dim(),
        }
    }

    pub fn eval(&self, t: f64) -> DVector<f64> {
        match self {
            Signal::Components(c) => DVector::from_iterator(c.len(), c.iter().map(|s| s.eval(t))),
            Signal::Combination(terms) => {
                let mut out = DVector::zeros(self.dim());
                for (m, s) in terms {
                    out += m * s.eval(t);
                }
                out
            }
            Signal::Discounted { rate, inner } => inner.eval(t) * (-rate * t).exp(),
        }
    }

    /// `self + m * other`.
    pub fn plus_mapped(&self, m: &DMatrix<f64>, other: &Signal) -> Signal {
        let n = self.dim();
        Signal::Combination(vec![
            (DMatrix::identity(n, n), self.clone()),
            (m.clone(), other.clone()),
        ])
    }

    pub fn discounted(&self, rate: f64) -> Signal {
        Signal::Discounted {
            rate,
            inner: Box::new(self.clone()),
        }
    }

    /// True when the signal does not depend on time.
    pub fn is_constant(&self) -> bool {
        match self {
            Signal::Components(c) => c.iter().all(ScalarSignal::is_constant),
            Signal::Combination(terms) => terms.iter().all(|(_, s)| s.is_constant()),
            Signal::Discounted { rate, inner } => *rate == 0.0 && inner.is_constant(),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Signal::Components(c) => c.iter().all(|s| s.is_constant() && s.eval(0.0) == 0.0),
            Signal::Combination(terms) => terms
                .iter()
                .all(|(m, s)| s.is_zero() || m.iter().all(|&x| x == 0.0)),
            Signal::Discounted { inner, .. } => inner.is_zero(),
        }
    }

    pub(crate) fn check(&self, name: &'static str, n: usize) -> Result<()> {
        if self.dim() != n {
            return Err(Error::Dimension {
                name,
                expected: format!("{n} components"),
                got: format!("{} components", self.dim()),
            });
        }
        match self {
            Signal::Components(c) => c.iter().try_for_each(|s| s.check(name)),
            Signal::Combination(terms) => terms.iter().try_for_each(|(m, s)| {
                if m.nrows() != n || m.ncols() != s.dim() {
                    return Err(Error::Dimension {
                        name,
                        expected: format!("{n}x{}", s.dim()),
                        got: format!("{}x{}", m.nrows(), m.ncols()),
                    });
                }
                s.check(name, s.dim())
            }),
            Signal::Discounted { rate, inner } => {
                if !rate.is_finite() {
                    return Err(Error::NonFinite(name));
                }
                inner.check(name, n)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_law_vanishes_at_origin() {
        let s = ScalarSignal::PowerLaw {
            scale: 0.05,
            exponent: 0.5,
        };
        assert_eq!(s.eval(0.0), 0.0);
        assert!((s.eval(4.0) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn polynomial_horner() {
        let s = ScalarSignal::Polynomial {
            coeffs: vec![1.0, -2.0, 3.0],
        };
        assert_eq!(s.eval(2.0), 1.0 - 4.0 + 12.0);
    }

    #[test]
    fn tabulated_interpolates_and_clamps() {
        let s = ScalarSignal::Tabulated {
            times: vec![0.0, 1.0, 3.0],
            values: vec![0.0, 2.0, 0.0],
        };
        assert_eq!(s.eval(-1.0), 0.0);
        assert_eq!(s.eval(0.5), 1.0);
        assert_eq!(s.eval(2.0), 1.0);
        assert_eq!(s.eval(10.0), 0.0);
    }

    #[test]
    fn tabulated_rejects_unsorted_grid() {
        let s = ScalarSignal::Tabulated {
            times: vec![0.0, 2.0, 1.0],
            values: vec![0.0, 1.0, 2.0],
        };
        assert!(s.check("f").is_err());
    }

    #[test]
    fn evaluation_is_bit_deterministic() {
        let s = Signal::Components(vec![
            ScalarSignal::Sinusoid {
                amplitude: 0.05,
                frequency: 1.0,
                phase: 0.0,
                offset: 0.0,
            },
            ScalarSignal::PowerLaw {
                scale: 0.05,
                exponent: 1.5,
            },
        ])
        .discounted(0.3);
        for &t in &[0.0, 0.1, 3.7, 10.0] {
            let a = s.eval(t);
            let b = s.eval(t);
            assert!(a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn combination_adds_mapped_signal() {
        let f = Signal::constant(&[1.0, 2.0]);
        let eta = Signal::constant(&[1.0, 1.0]);
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 3.0]);
        let g = f.plus_mapped(&m, &eta);
        assert_eq!(g.eval(5.0).as_slice(), &[2.0, 5.0]);
        assert!(g.is_constant());
    }
}
