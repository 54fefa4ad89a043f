use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Least-squares fit of `log eps = intercept + slope * log N`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// `exp(intercept)`, the constant in `eps ~ c N^slope`.
    pub constant: f64,
    pub slope_se: f64,
    /// 95% Student-t confidence interval of the slope.
    pub slope_ci95: (f64, f64),
    pub r_squared: f64,
    /// Residuals in log space, in input order.
    pub residuals: Vec<f64>,
}

/// Fit `eps(N) ~ c N^slope` by ordinary least squares in log-log space.
pub fn epsilon_rate_fit(points: &[(f64, f64)]) -> Result<RateFit> {
    let mut distinct: Vec<f64> = points.iter().map(|p| p.0).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 4 {
        return Err(Error::TooFewPoints {
            needed: 4,
            got: distinct.len(),
        });
    }
    if points.iter().any(|&(n, e)| !(n > 0.0 && e > 0.0)) {
        return Err(Error::InvalidParameter {
            name: "points",
            reason: "N and eps must be positive".into(),
        });
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<f64> = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| y - intercept - slope * x)
        .collect();
    let sse: f64 = residuals.iter().map(|r| r * r).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let dof = m - 2.0;
    let slope_se = (sse / dof / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, dof)
        .map_err(|e| Error::Numerical(e.to_string()))?
        .inverse_cdf(0.975);
    Ok(RateFit {
        slope,
        intercept,
        constant: intercept.exp(),
        slope_se,
        slope_ci95: (slope - t * slope_se, slope + t * slope_se),
        r_squared: if syy > 0.0 { 1.0 - sse / syy } else { 1.0 },
        residuals,
    })
}

/// Constant `c` of `eps(N) = c / sqrt(N)` fitted with the exponent held at
/// `-1/2`: the geometric mean of `eps(N) sqrt(N)`.
pub fn half_rate_constant(points: &[(f64, f64)]) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::TooFewPoints { needed: 1, got: 0 });
    }
    let s: f64 = points.iter().map(|&(n, e)| e.ln() + 0.5 * n.ln()).sum();
    Ok((s / points.len() as f64).exp())
}
