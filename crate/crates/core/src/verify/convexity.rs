//! Monte Carlo probe of the convexity condition.
//!
//! A random control `u` enters agent `i`'s variational state `x~_i`; the
//! other agents' variations `x~_j` react through the population average and
//! carry their own idiosyncratic noise. The probed functional is
//! `E { int ||x~_i - Gamma x~^(N)||_Q^2 + ||u||_R^2 dt + ||x~_i(T) - Gamma0 x~^(N)(T)||_H^2 }`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Horizon, ModelParams};
use crate::riccati::TimeGrid;
use crate::rng::{stream, StreamKind};
use crate::simulate::{for_replications, Estimate, NoiseSource, StreamNoise};

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeConfig {
    pub probes: usize,
    pub agents: usize,
    pub steps: usize,
    pub replications: usize,
    pub seed: u64,
    /// Pieces of the piecewise-constant probe controls.
    pub segments: usize,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            probes: 8,
            agents: 10,
            steps: 500,
            replications: 64,
            seed: 1,
            segments: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeReport {
    pub values: Vec<Estimate>,
    pub min_index: usize,
    pub min: Estimate,
    /// The smallest value lies below zero by more than three standard errors.
    pub violated: bool,
}

/// Piecewise-constant control with Gaussian levels, `[segment][r]`.
fn probe_control(seed: u64, probe: usize, segments: usize, r: usize) -> Vec<f64> {
    let mut rng = stream(seed, probe as u64, 0, StreamKind::Probe);
    (0..segments * r).map(|_| rng.sample(StandardNormal)).collect()
}

fn mv(m: &nalgebra::DMatrix<f64>, x: &[f64], out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        *o += (0..x.len()).map(|j| m[(i, j)] * x[j]).sum::<f64>();
    }
}

fn quad(m: &nalgebra::DMatrix<f64>, v: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..v.len() {
        for j in 0..v.len() {
            s += v[i] * m[(i, j)] * v[j];
        }
    }
    s
}

/// One replication of the probed functional for a fixed control.
fn probe_once(
    params: &ModelParams,
    grid: &TimeGrid,
    agents: usize,
    control: &[f64],
    segments: usize,
    noise: &mut StreamNoise,
) -> f64 {
    let (n, r) = (params.n(), params.r_dim());
    let steps = grid.steps();
    let dt = grid.dt();
    let sq = dt.sqrt();
    let mut x = vec![0.0; agents * n];
    let mut next = vec![0.0; agents * n];
    let mut avg = vec![0.0; n];
    let mut e = vec![0.0; n];
    let mut drift = vec![0.0; n];
    let mut diff = vec![0.0; n];
    let mut cdiff = vec![0.0; n];
    let zero_u = vec![0.0; r];
    let inv_n = 1.0 / agents as f64;

    let running = |x: &[f64], avg: &[f64], u: &[f64], e: &mut [f64]| {
        e.copy_from_slice(&x[..n]);
        for i in 0..n {
            e[i] -= (0..n).map(|j| params.gamma[(i, j)] * avg[j]).sum::<f64>();
        }
        quad(&params.q, e) + quad(&params.r, u)
    };
    let segment = |k: usize| ((k * segments) / steps).min(segments - 1);

    let mut integral = 0.0;
    let mut prev = running(&x, &avg, &control[..r], &mut e);
    for k in 0..steps {
        let dw0 = noise.common() * sq;
        let s = segment(k);
        for a in 0..agents {
            let xa = &x[a * n..(a + 1) * n];
            let u = if a == 0 { &control[s * r..(s + 1) * r] } else { &zero_u[..] };
            drift.iter_mut().for_each(|v| *v = 0.0);
            diff.iter_mut().for_each(|v| *v = 0.0);
            cdiff.iter_mut().for_each(|v| *v = 0.0);
            mv(&params.a, xa, &mut drift);
            mv(&params.b, u, &mut drift);
            mv(&params.g, &avg, &mut drift);
            mv(&params.c, xa, &mut diff);
            mv(&params.d, u, &mut diff);
            mv(&params.f, &avg, &mut diff);
            mv(&params.c0, xa, &mut cdiff);
            mv(&params.d0, u, &mut cdiff);
            mv(&params.f0, &avg, &mut cdiff);
            let dw = noise.idiosyncratic(a) * sq;
            for i in 0..n {
                next[a * n + i] = xa[i] + drift[i] * dt + diff[i] * dw + cdiff[i] * dw0;
            }
        }
        std::mem::swap(&mut x, &mut next);
        avg.iter_mut().for_each(|v| *v = 0.0);
        for a in 0..agents {
            for i in 0..n {
                avg[i] += x[a * n + i] * inv_n;
            }
        }
        let s_next = segment((k + 1).min(steps - 1));
        let cur = running(&x, &avg, &control[s_next * r..(s_next + 1) * r], &mut e);
        integral += 0.5 * (prev + cur) * dt;
        prev = cur;
    }
    e.copy_from_slice(&x[..n]);
    for i in 0..n {
        e[i] -= (0..n).map(|j| params.gamma0[(i, j)] * avg[j]).sum::<f64>();
    }
    integral + quad(&params.h, &e)
}

/// Probe the convexity condition with `cfg.probes` random controls.
pub fn convexity_probe(params: &ModelParams, cfg: &ProbeConfig) -> Result<ProbeReport> {
    let t_end = match params.horizon {
        Horizon::Finite(t) => t,
        Horizon::Infinite => {
            return Err(Error::Precondition(
                "convexity probe needs a finite horizon".into(),
            ))
        }
    };
    if cfg.probes == 0 || cfg.agents == 0 || cfg.segments == 0 || cfg.replications < 2 {
        return Err(Error::InvalidParameter {
            name: "probe config",
            reason: "needs probes, agents, segments >= 1 and replications >= 2".into(),
        });
    }
    let grid = TimeGrid::new(t_end, cfg.steps)?;
    let mut values = Vec::with_capacity(cfg.probes);
    for probe in 0..cfg.probes {
        let control = probe_control(cfg.seed, probe, cfg.segments, params.r_dim());
        let samples = for_replications(cfg.replications, |rep| {
            let mut noise = StreamNoise::new(cfg.seed, rep, cfg.agents);
            Ok(probe_once(params, &grid, cfg.agents, &control, cfg.segments, &mut noise))
        })?;
        values.push(Estimate::from_samples(&samples));
    }
    let (min_index, min) = values
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.mean.total_cmp(&b.1.mean))
        .expect("at least one probe");
    Ok(ProbeReport {
        violated: min.mean < -3.0 * min.se,
        values,
        min_index,
        min,
    })
}
