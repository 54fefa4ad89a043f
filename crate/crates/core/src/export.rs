//! CSV and JSON writers for solver and simulation output.
//!
//! Floats are written in Rust's shortest round-trip form, so a file read back
//! reproduces the stored values exactly.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::Result;
use crate::riccati::{FeedbackLaw, RiccatiSolution};
use crate::simulate::PopulationPath;
use crate::stationary::{EigenSplit, KRoute, LoopCertificate, StationaryResiduals, StationarySolution};
use crate::verify::SweepPoint;

fn num(v: f64) -> String {
    format!("{v}")
}

fn matrix_header(out: &mut Vec<String>, name: &str, rows: usize, cols: usize) {
    for i in 1..=rows {
        for j in 1..=cols {
            out.push(format!("{name}_{i}{j}"));
        }
    }
}

fn push_matrix(out: &mut Vec<String>, m: &DMatrix<f64>) {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(num(m[(i, j)]));
        }
    }
}

/// One row per grid node: `t`, `P` and `K` row-major, `phi`, then the gains
/// `L_self`, `L_mf` and the offset `c`.
pub fn write_riccati_csv<W: Write>(w: W, sol: &RiccatiSolution, law: &FeedbackLaw) -> Result<()> {
    let n = sol.p[0].nrows();
    let r = law.control_dim();
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["t".to_string()];
    matrix_header(&mut header, "P", n, n);
    matrix_header(&mut header, "K", n, n);
    header.extend((1..=n).map(|i| format!("phi_{i}")));
    matrix_header(&mut header, "Lself", r, n);
    matrix_header(&mut header, "Lmf", r, n);
    header.extend((1..=r).map(|i| format!("c_{i}")));
    wtr.write_record(&header)?;
    for (node, t) in sol.grid.nodes().into_iter().enumerate() {
        let mut row = vec![num(t)];
        push_matrix(&mut row, &sol.p[node]);
        push_matrix(&mut row, &sol.k[node]);
        row.extend(sol.phi[node].iter().map(|&v| num(v)));
        let (ls, lm, c) = law.gains(node);
        push_matrix(&mut row, ls);
        push_matrix(&mut row, lm);
        row.extend(c.iter().map(|&v| num(v)));
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

/// `agents, epsilon, stderr, replications`, one row per population size.
pub fn write_epsilon_csv<W: Write>(w: W, points: &[SweepPoint]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["agents", "epsilon", "stderr", "replications"])?;
    for p in points {
        wtr.write_record([
            p.agents.to_string(),
            num(p.epsilon.value),
            num(p.epsilon.se),
            p.epsilon.integral.samples.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Long-format trajectories: `replication, t, agent, x_1.., u_1..`.
///
/// Recorded agents appear by index. The rows `mean` carry the empirical
/// average `x^(N)` and the rows `xbar` the simulated mean field; both leave
/// the control columns empty.
pub fn write_trajectories_csv<W: Write>(w: W, paths: &[PopulationPath]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let Some(first) = paths.first() else {
        wtr.flush()?;
        return Ok(());
    };
    let (n, r) = (first.n, first.r);
    let mut header = vec!["replication".to_string(), "t".into(), "agent".into()];
    header.extend((1..=n).map(|i| format!("x_{i}")));
    header.extend((1..=r).map(|i| format!("u_{i}")));
    wtr.write_record(&header)?;
    let blank = vec![String::new(); r];
    for path in paths {
        for (node, &t) in path.times.iter().enumerate() {
            let lead = |who: String| vec![path.replication.to_string(), num(t), who];
            for &agent in &path.recorded {
                let mut row = lead(agent.to_string());
                if let (Some(x), Some(u)) = (path.x_at(node, agent), path.u_at(node, agent)) {
                    row.extend(x.iter().map(|&v| num(v)));
                    row.extend(u.iter().map(|&v| num(v)));
                    wtr.write_record(&row)?;
                }
            }
            for (who, x) in [("mean", path.x_avg_at(node)), ("xbar", path.x_bar_at(node))] {
                let mut row = lead(who.into());
                row.extend(x.iter().map(|&v| num(v)));
                row.extend(blank.iter().cloned());
                wtr.write_record(&row)?;
            }
        }
    }
    wtr.flush()?;
    Ok(())
}

pub fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn vector(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct Spectrum {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
    pub split: EigenSplit,
}

/// Serializable summary of a stationary solve.
#[derive(Debug, Clone, Serialize)]
pub struct StationaryReport {
    pub p: Vec<Vec<f64>>,
    pub k: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pi: Option<Vec<Vec<f64>>>,
    pub phi_bar: Vec<f64>,
    pub self_gain: Vec<Vec<f64>>,
    pub mf_gain: Vec<Vec<f64>>,
    pub offset: Vec<f64>,
    pub k_route: KRoute,
    pub k_certified: bool,
    pub certified: bool,
    pub residuals: StationaryResiduals,
    pub stability: LoopCertificate,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<Spectrum>,
}

impl StationaryReport {
    pub fn new(sol: &StationarySolution) -> Self {
        let (ls, lm, c) = sol.law.gains(0);
        StationaryReport {
            p: matrix_rows(&sol.p),
            k: matrix_rows(&sol.k),
            pi: sol.pi.as_ref().map(matrix_rows),
            phi_bar: vector(&sol.phi_bar),
            self_gain: matrix_rows(ls),
            mf_gain: matrix_rows(lm),
            offset: vector(c),
            k_route: sol.k_route,
            k_certified: sol.k_certified,
            certified: sol.is_certified(),
            residuals: sol.residuals,
            stability: sol.loops,
            spectrum: sol.csplit.as_ref().map(|cs| Spectrum {
                re: cs.eigenvalues.iter().map(|z| z.re).collect(),
                im: cs.eigenvalues.iter().map(|z| z.im).collect(),
                split: cs.eigen_split,
            }),
        }
    }
}

pub fn write_json<W: Write, T: Serialize>(mut w: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for v in [0.1, -0.25, 1e-17, 123456.789, f64::MIN_POSITIVE] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn matrix_header_is_row_major() {
        let mut h = Vec::new();
        matrix_header(&mut h, "P", 2, 2);
        assert_eq!(h, ["P_11", "P_12", "P_21", "P_22"]);
    }
}
