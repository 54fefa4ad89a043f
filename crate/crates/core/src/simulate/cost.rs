//! Cost functionals and the mean-field gap `eps(N)` along simulated paths.

use serde::Serialize;

use super::PopulationPath;
use crate::error::{Error, Result};
use crate::model::{Horizon, ModelParams};

/// Share of an infinite-horizon cost integral allowed in the last tenth of
/// the window before a truncation warning.
pub const TAIL_FRACTION_LIMIT: f64 = 0.01;

/// Monte Carlo mean with its standard error. The standard error is NaN for a
/// single sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
    pub samples: usize,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let m = xs.len();
        let mean = xs.iter().sum::<f64>() / m as f64;
        let se = if m > 1 {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
            (var / m as f64).sqrt()
        } else {
            f64::NAN
        };
        Estimate {
            mean,
            se,
            samples: m,
        }
    }
}

/// Cost of one agent along one replication.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostSample {
    /// `int ||x_i - Gamma x^(N) - eta||_Q^2 dt`.
    pub tracking: f64,
    /// `int ||u_i||_R^2 dt`.
    pub control: f64,
    /// `||x_i(T) - Gamma0 x^(N)(T) - eta0||_H^2`, zero for infinite horizons.
    pub terminal: f64,
    /// Running cost accumulated over the last tenth of the window.
    pub tail: f64,
}

impl CostSample {
    pub fn total(&self) -> f64 {
        self.tracking + self.control + self.terminal
    }
}

/// Replication average of one agent's cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AgentCost {
    pub agent: usize,
    pub total: Estimate,
    pub tracking: Estimate,
    pub control: Estimate,
    pub terminal: Estimate,
    /// Share of the running cost in the last tenth of an infinite-horizon
    /// window.
    pub tail_fraction: Option<f64>,
    pub tail_warning: bool,
}

fn quad(m: &nalgebra::DMatrix<f64>, v: &[f64]) -> f64 {
    let k = v.len();
    let mut s = 0.0;
    for i in 0..k {
        for j in 0..k {
            s += v[i] * m[(i, j)] * v[j];
        }
    }
    s
}

/// Trapezoid sum of `values` sampled at uniform spacing `dt`.
fn trapezoid(values: &[f64], dt: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        len => {
            let inner: f64 = values[1..len - 1].iter().sum();
            dt * (0.5 * (values[0] + values[len - 1]) + inner)
        }
    }
}

/// Cost of `agent` along a single replication.
pub fn path_cost(path: &PopulationPath, params: &ModelParams, agent: usize) -> Result<CostSample> {
    if agent >= path.agents {
        return Err(Error::IndexOutOfRange {
            index: agent,
            len: path.agents,
        });
    }
    if path.x_at(0, agent).is_none() {
        return Err(Error::Precondition(format!("agent {agent} was not recorded")));
    }
    let n = path.n;
    let nodes = path.nodes();
    let mut track = Vec::with_capacity(nodes);
    let mut ctrl = Vec::with_capacity(nodes);
    let mut e = vec![0.0; n];
    for node in 0..nodes {
        let x = path.x_at(node, agent).expect("recorded");
        let avg = path.x_avg_at(node);
        let eta = params.target.eval(path.times[node]);
        for i in 0..n {
            let mut g = 0.0;
            for j in 0..n {
                g += params.gamma[(i, j)] * avg[j];
            }
            e[i] = x[i] - g - eta[i];
        }
        track.push(quad(&params.q, &e));
        ctrl.push(quad(&params.r, path.u_at(node, agent).expect("recorded")));
    }
    let dt = path.dt();
    let terminal = match params.horizon {
        Horizon::Finite(_) => {
            let last = nodes - 1;
            let x = path.x_at(last, agent).expect("recorded");
            let avg = path.x_avg_at(last);
            for i in 0..n {
                let mut g = 0.0;
                for j in 0..n {
                    g += params.gamma0[(i, j)] * avg[j];
                }
                e[i] = x[i] - g - params.terminal_target[i];
            }
            quad(&params.h, &e)
        }
        Horizon::Infinite => 0.0,
    };
    let t_end = path.times[nodes - 1];
    let tail_start = path
        .times
        .iter()
        .position(|&t| t >= 0.9 * t_end)
        .unwrap_or(nodes - 1);
    let running: Vec<f64> = track.iter().zip(&ctrl).map(|(a, b)| a + b).collect();
    Ok(CostSample {
        tracking: trapezoid(&track, dt),
        control: trapezoid(&ctrl, dt),
        terminal,
        tail: trapezoid(&running[tail_start..], dt),
    })
}

/// Average cost of `agent` over replications, with standard errors.
pub fn evaluate_cost(
    paths: &[PopulationPath],
    params: &ModelParams,
    agent: usize,
) -> Result<AgentCost> {
    if paths.is_empty() {
        return Err(Error::TooFewPoints { needed: 1, got: 0 });
    }
    let samples = paths
        .iter()
        .map(|p| path_cost(p, params, agent))
        .collect::<Result<Vec<_>>>()?;
    let col = |f: fn(&CostSample) -> f64| -> Vec<f64> { samples.iter().map(f).collect() };
    let running: f64 = samples.iter().map(|s| s.tracking + s.control).sum();
    let tail: f64 = samples.iter().map(|s| s.tail).sum();
    let tail_fraction = match params.horizon {
        Horizon::Infinite if running > 0.0 => Some(tail / running),
        Horizon::Infinite => Some(0.0),
        Horizon::Finite(_) => None,
    };
    Ok(AgentCost {
        agent,
        total: Estimate::from_samples(&col(CostSample::total)),
        tracking: Estimate::from_samples(&col(|s| s.tracking)),
        control: Estimate::from_samples(&col(|s| s.control)),
        terminal: Estimate::from_samples(&col(|s| s.terminal)),
        tail_fraction,
        tail_warning: tail_fraction.is_some_and(|f| f > TAIL_FRACTION_LIMIT),
    })
}

/// `int_0^T ||x^(N) - xbar||^2 dt` along one replication.
pub fn epsilon_integral(path: &PopulationPath) -> f64 {
    let vals: Vec<f64> = (0..path.nodes())
        .map(|k| {
            path.x_avg_at(k)
                .iter()
                .zip(path.x_bar_at(k))
                .map(|(a, b)| (a - b) * (a - b))
                .sum()
        })
        .collect();
    trapezoid(&vals, path.dt())
}

/// `eps(N)` with a delta-method standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpsilonEstimate {
    pub value: f64,
    pub se: f64,
    /// The replication mean of the integral, before the square root.
    pub integral: Estimate,
}

pub fn epsilon_from_integrals(integrals: &[f64]) -> Result<EpsilonEstimate> {
    if integrals.is_empty() {
        return Err(Error::TooFewPoints { needed: 1, got: 0 });
    }
    let integral = Estimate::from_samples(integrals);
    let value = integral.mean.max(0.0).sqrt();
    let se = if value > 0.0 {
        integral.se / (2.0 * value)
    } else {
        0.0
    };
    Ok(EpsilonEstimate {
        value,
        se,
        integral,
    })
}

/// `eps(N) = (E int ||x^(N) - xbar||^2 dt)^(1/2)` over replications.
pub fn epsilon_metric(paths: &[PopulationPath]) -> Result<EpsilonEstimate> {
    let integrals: Vec<f64> = paths.iter().map(epsilon_integral).collect();
    epsilon_from_integrals(&integrals)
}
