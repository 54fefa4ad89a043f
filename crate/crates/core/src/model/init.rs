use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sampling rule for the i.i.d. initial states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitLaw {
    /// Independent uniform components on `[low[k], high[k]]`.
    Uniform { low: Vec<f64>, high: Vec<f64> },
    /// Independent Gaussian components.
    Gaussian { mean: Vec<f64>, std: Vec<f64> },
    /// Every agent starts at the same point.
    Dirac { point: Vec<f64> },
}

impl InitLaw {
    pub fn dim(&self) -> usize {
        match self {
            InitLaw::Uniform { low, .. } => low.len(),
            InitLaw::Gaussian { mean, .. } => mean.len(),
            InitLaw::Dirac { point } => point.len(),
        }
    }

    pub fn mean(&self) -> DVector<f64> {
        match self {
            InitLaw::Uniform { low, high } => {
                DVector::from_iterator(low.len(), low.iter().zip(high).map(|(a, b)| 0.5 * (a + b)))
            }
            InitLaw::Gaussian { mean, .. } => DVector::from_column_slice(mean),
            InitLaw::Dirac { point } => DVector::from_column_slice(point),
        }
    }

    /// Draw one initial state into `out`.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match self {
            InitLaw::Uniform { low, high } => {
                for (k, x) in out.iter_mut().enumerate() {
                    let u: f64 = rng.random();
                    *x = low[k] + (high[k] - low[k]) * u;
                }
            }
            InitLaw::Gaussian { mean, std } => {
                for (k, x) in out.iter_mut().enumerate() {
                    let z: f64 = StandardNormal.sample(rng);
                    *x = mean[k] + std[k] * z;
                }
            }
            InitLaw::Dirac { point } => out.copy_from_slice(point),
        }
    }

    pub(crate) fn check(&self, n: usize) -> Result<()> {
        let (a, b): (&[f64], &[f64]) = match self {
            InitLaw::Uniform { low, high } => (low, high),
            InitLaw::Gaussian { mean, std } => (mean, std),
            InitLaw::Dirac { point } => (point, point),
        };
        if a.len() != n || b.len() != n {
            return Err(Error::Dimension {
                name: "init_law",
                expected: format!("{n} components"),
                got: format!("{}/{} components", a.len(), b.len()),
            });
        }
        if !a.iter().chain(b).all(|x| x.is_finite()) {
            return Err(Error::NonFinite("init_law"));
        }
        match self {
            InitLaw::Uniform { low, high } if low.iter().zip(high).any(|(l, h)| h < l) => {
                Err(Error::InvalidParameter {
                    name: "init_law",
                    reason: "uniform bounds need low <= high".into(),
                })
            }
            InitLaw::Gaussian { std, .. } if std.iter().any(|s| *s < 0.0) => {
                Err(Error::InvalidParameter {
                    name: "init_law",
                    reason: "negative standard deviation".into(),
                })
            }
            _ => Ok(()),
        }
    }
}
