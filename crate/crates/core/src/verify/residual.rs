use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, PINV_RTOL};
use crate::model::ModelParams;
use crate::riccati::RiccatiSolution;
use crate::simulate::PopulationPath;

/// Largest violation of `B^T p + D^T q + D0^T q0 + R u = 0` over the
/// evaluated points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualStat {
    pub max: f64,
    pub node: usize,
    pub agent: usize,
    pub replication: u64,
    pub evaluated: usize,
}

/// Adjoint values reconstructed from the state at one node.
#[derive(Debug, Clone)]
pub struct AdjointPoint {
    pub p: DVector<f64>,
    pub q: DVector<f64>,
    pub q0: DVector<f64>,
}

/// `p = P x + K xbar + phi`, `q = P (C x + D u + F xbar + sigma)` and
/// `q0 = psi + P (C0 x + D0 u + F0 xbar + sigma0) + K ((C0 + F0) xbar + D0 ubar + sigma0)`.
#[allow(clippy::too_many_arguments)]
pub fn adjoint_point(
    params: &ModelParams,
    t: f64,
    p: &DMatrix<f64>,
    k: &DMatrix<f64>,
    phi: &DVector<f64>,
    psi: &DVector<f64>,
    x: &DVector<f64>,
    x_bar: &DVector<f64>,
    u: &DVector<f64>,
    u_bar: &DVector<f64>,
) -> AdjointPoint {
    let sigma = params.noise_offset.eval(t);
    let sigma0 = params.common_noise_offset.eval(t);
    let adj_p = p * x + k * x_bar + phi;
    let q = p * (&params.c * x + &params.d * u + &params.f * x_bar + sigma);
    let q0 = psi
        + p * (&params.c0 * x + &params.d0 * u + &params.f0 * x_bar + &sigma0)
        + k * ((&params.c0 + &params.f0) * x_bar + &params.d0 * u_bar + sigma0);
    AdjointPoint { p: adj_p, q, q0 }
}

/// Stationarity residual along stored paths simulated on the solution's grid.
pub fn stationarity_residual(
    paths: &[PopulationPath],
    solution: &RiccatiSolution,
    params: &ModelParams,
) -> Result<ResidualStat> {
    let mut stat = ResidualStat {
        max: 0.0,
        node: 0,
        agent: 0,
        replication: 0,
        evaluated: 0,
    };
    let grid = &solution.grid;
    let bt = params.b.transpose();
    let dt = params.d.transpose();
    let d0t = params.d0.transpose();
    for path in paths {
        if path.nodes() != grid.len()
            || path
                .times
                .iter()
                .enumerate()
                .any(|(k, &t)| (t - grid.node(k)).abs() > 1e-12 * grid.t_end().max(1.0))
        {
            return Err(Error::GridMismatch(format!(
                "path has {} nodes, solution grid {}",
                path.nodes(),
                grid.len()
            )));
        }
        for node in 0..path.nodes() {
            let t = path.times[node];
            let b = solution.bundle_at(params, node);
            let x_bar = DVector::from_column_slice(path.x_bar_at(node));
            let upsb_pinv = linalg::pinv(&b.upsilon_bar, PINV_RTOL);
            let u_bar = -(upsb_pinv * ((&b.phi + &b.psi) * &x_bar + &b.theta));
            let psi = solution.psi(node);
            for &agent in &path.recorded {
                let x = DVector::from_column_slice(path.x_at(node, agent).expect("recorded"));
                let u = DVector::from_column_slice(path.u_at(node, agent).expect("recorded"));
                let a = adjoint_point(
                    params,
                    t,
                    &solution.p[node],
                    &solution.k[node],
                    &solution.phi[node],
                    &psi,
                    &x,
                    &x_bar,
                    &u,
                    &u_bar,
                );
                let res = (&bt * &a.p + &dt * &a.q + &d0t * &a.q0 + &params.r * &u).norm();
                stat.evaluated += 1;
                if res > stat.max || stat.evaluated == 1 {
                    stat.max = res;
                    stat.node = node;
                    stat.agent = agent;
                    stat.replication = path.replication;
                }
            }
        }
    }
    if stat.evaluated == 0 {
        return Err(Error::Precondition(
            "no recorded agent paths to evaluate".into(),
        ));
    }
    Ok(stat)
}
