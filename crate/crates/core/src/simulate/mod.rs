//! Euler-Maruyama simulation of a finite population under a decentralized
//! feedback law, together with the mean-field proxy `xbar` driven by the same
//! common noise.
//!
//! Each agent `i` draws its own Brownian increments and initial state from
//! streams addressed by `(seed, replication, i)`, so the same agent sees the
//! same randomness whatever the population size.

mod cost;

pub use cost::{
    epsilon_from_integrals, epsilon_integral, epsilon_metric, evaluate_cost, path_cost, AgentCost,
    CostSample, EpsilonEstimate, Estimate, TAIL_FRACTION_LIMIT,
};

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{Horizon, InitLaw, ModelParams};
use crate::riccati::{FeedbackLaw, TimeGrid};
use crate::rng::{stream, StreamKind};

/// States with a component above this magnitude count as a blow-up.
pub const BLOW_UP_STATE: f64 = 1e12;

/// Which per-agent paths to keep.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Record {
    /// Every agent.
    All,
    /// The listed agents, in the given order.
    Agents(Vec<usize>),
    /// Only the population average and `xbar`.
    MeanOnly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub agents: usize,
    pub steps: usize,
    /// End of the simulated window: `T` for finite horizons, a user window
    /// otherwise.
    pub t_end: f64,
    pub replications: usize,
    pub seed: u64,
    pub record: Record,
}

impl SimConfig {
    /// Configuration over the model horizon. Infinite horizons need `window`.
    pub fn new(
        params: &ModelParams,
        agents: usize,
        steps: usize,
        replications: usize,
        seed: u64,
        window: Option<f64>,
    ) -> Result<Self> {
        let t_end = match (params.horizon, window) {
            (Horizon::Finite(t), _) => t,
            (Horizon::Infinite, Some(w)) => w,
            (Horizon::Infinite, None) => {
                return Err(Error::Precondition(
                    "infinite-horizon simulation needs a window".into(),
                ))
            }
        };
        let cfg = SimConfig {
            agents,
            steps,
            t_end,
            replications,
            seed,
            record: Record::All,
        };
        cfg.check()?;
        Ok(cfg)
    }

    pub fn with_record(mut self, record: Record) -> Self {
        self.record = record;
        self
    }

    pub fn with_agents(mut self, agents: usize) -> Self {
        self.agents = agents;
        self
    }

    pub fn check(&self) -> Result<()> {
        for (name, v) in [
            ("agents", self.agents),
            ("steps", self.steps),
            ("replications", self.replications),
        ] {
            if v == 0 {
                return Err(Error::InvalidParameter {
                    name,
                    reason: "must be at least 1".into(),
                });
            }
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(Error::InvalidParameter {
                name: "t_end",
                reason: format!("must be positive and finite, got {}", self.t_end),
            });
        }
        if let Record::Agents(list) = &self.record {
            if let Some(&bad) = list.iter().find(|&&i| i >= self.agents) {
                return Err(Error::IndexOutOfRange {
                    index: bad,
                    len: self.agents,
                });
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.t_end, self.steps)
    }

    fn recorded(&self) -> Vec<usize> {
        match &self.record {
            Record::All => (0..self.agents).collect(),
            Record::Agents(list) => list.clone(),
            Record::MeanOnly => Vec::new(),
        }
    }
}

/// One replication of the population.
#[derive(Debug, Clone)]
pub struct PopulationPath {
    pub times: Vec<f64>,
    pub n: usize,
    pub r: usize,
    pub agents: usize,
    /// Agents whose paths are stored, in storage order.
    pub recorded: Vec<usize>,
    /// States of recorded agents, node-major: `[node][k][n]`.
    pub x: Vec<f64>,
    /// Controls of recorded agents, node-major: `[node][k][r]`.
    pub u: Vec<f64>,
    /// Population average, `[node][n]`.
    pub x_avg: Vec<f64>,
    /// Mean-field proxy, `[node][n]`.
    pub x_bar: Vec<f64>,
    /// Common Brownian increments, one per step.
    pub common_dw: Vec<f64>,
    pub seed: u64,
    pub replication: u64,
}

impl PopulationPath {
    pub fn nodes(&self) -> usize {
        self.times.len()
    }

    pub fn dt(&self) -> f64 {
        self.times[1] - self.times[0]
    }

    fn slot(&self, agent: usize) -> Option<usize> {
        self.recorded.iter().position(|&a| a == agent)
    }

    /// State of `agent` at `node`, if recorded.
    pub fn x_at(&self, node: usize, agent: usize) -> Option<&[f64]> {
        let k = self.slot(agent)?;
        let off = (node * self.recorded.len() + k) * self.n;
        Some(&self.x[off..off + self.n])
    }

    pub fn u_at(&self, node: usize, agent: usize) -> Option<&[f64]> {
        let k = self.slot(agent)?;
        let off = (node * self.recorded.len() + k) * self.r;
        Some(&self.u[off..off + self.r])
    }

    pub fn x_avg_at(&self, node: usize) -> &[f64] {
        &self.x_avg[node * self.n..(node + 1) * self.n]
    }

    pub fn x_bar_at(&self, node: usize) -> &[f64] {
        &self.x_bar[node * self.n..(node + 1) * self.n]
    }
}

/// Source of standard normal draws and initial states for one replication.
///
/// Per step the simulator asks for the common draw first, then the
/// idiosyncratic draws in agent order.
pub trait NoiseSource {
    fn common(&mut self) -> f64;
    fn idiosyncratic(&mut self, agent: usize) -> f64;
    fn initial(&mut self, agent: usize, law: &InitLaw, out: &mut [f64]);
}

/// Streams addressed by `(seed, replication, agent, kind)`.
pub struct StreamNoise {
    seed: u64,
    replication: u64,
    common: ChaCha8Rng,
    idio: Vec<ChaCha8Rng>,
}

impl StreamNoise {
    pub fn new(seed: u64, replication: u64, agents: usize) -> Self {
        StreamNoise {
            seed,
            replication,
            common: stream(seed, replication, 0, StreamKind::Common),
            idio: (0..agents as u64)
                .map(|i| stream(seed, replication, i, StreamKind::Idiosyncratic))
                .collect(),
        }
    }
}

impl NoiseSource for StreamNoise {
    fn common(&mut self) -> f64 {
        self.common.sample(StandardNormal)
    }

    fn idiosyncratic(&mut self, agent: usize) -> f64 {
        self.idio[agent].sample(StandardNormal)
    }

    fn initial(&mut self, agent: usize, law: &InitLaw, out: &mut [f64]) {
        let mut rng = stream(self.seed, self.replication, agent as u64, StreamKind::Initial);
        law.sample_into(&mut rng, out);
    }
}

/// Replacement rule for one agent's control. `u` holds the law's control on
/// entry and the applied control on exit.
pub trait ControlOverride: Sync {
    fn adjust(&self, node: usize, t: f64, x: &[f64], x_bar: &[f64], u: &mut [f64]);
}

/// A unilateral deviation: `agent` applies `rule` on top of the law.
#[derive(Clone, Copy)]
pub struct Unilateral<'a> {
    pub agent: usize,
    pub rule: &'a dyn ControlOverride,
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

/// `out += M x` for a row-major `rows x cols` matrix.
#[inline]
fn mv_add(out: &mut [f64], m: &[f64], x: &[f64]) {
    let cols = x.len();
    for (i, o) in out.iter_mut().enumerate() {
        let row = &m[i * cols..(i + 1) * cols];
        let mut s = 0.0;
        for j in 0..cols {
            s += row[j] * x[j];
        }
        *o += s;
    }
}

/// Model and law data flattened for the inner loop.
struct Prepared {
    n: usize,
    r: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    g: Vec<f64>,
    c: Vec<f64>,
    d: Vec<f64>,
    f: Vec<f64>,
    c0: Vec<f64>,
    d0: Vec<f64>,
    f0: Vec<f64>,
    /// Offsets per node, `[node][n]`.
    drift: Vec<f64>,
    sigma: Vec<f64>,
    sigma0: Vec<f64>,
    ls: Vec<Vec<f64>>,
    lm: Vec<Vec<f64>>,
    lc: Vec<Vec<f64>>,
    constant_law: bool,
}

impl Prepared {
    fn new(params: &ModelParams, law: &FeedbackLaw, grid: &TimeGrid) -> Result<Self> {
        let (n, r) = (params.n(), params.r_dim());
        if law.state_dim() != n || law.control_dim() != r {
            return Err(Error::Dimension {
                name: "feedback law",
                expected: format!("{r}x{n} gains"),
                got: format!("{}x{} gains", law.control_dim(), law.state_dim()),
            });
        }
        if let Some(g) = law.grid() {
            let tol = 1e-12 * g.t_end().abs().max(1.0);
            if g.steps() != grid.steps() || (g.t_end() - grid.t_end()).abs() > tol {
                return Err(Error::GridMismatch(format!(
                    "law on {} steps over [0, {}], simulation on {} steps over [0, {}]",
                    g.steps(),
                    g.t_end(),
                    grid.steps(),
                    grid.t_end()
                )));
            }
        }
        let nodes = grid.nodes();
        let per_node = |s: &crate::model::Signal| -> Vec<f64> {
            nodes.iter().flat_map(|&t| s.eval(t).iter().copied().collect::<Vec<_>>()).collect()
        };
        Ok(Prepared {
            n,
            r,
            a: row_major(&params.a),
            b: row_major(&params.b),
            g: row_major(&params.g),
            c: row_major(&params.c),
            d: row_major(&params.d),
            f: row_major(&params.f),
            c0: row_major(&params.c0),
            d0: row_major(&params.d0),
            f0: row_major(&params.f0),
            drift: per_node(&params.drift_offset),
            sigma: per_node(&params.noise_offset),
            sigma0: per_node(&params.common_noise_offset),
            ls: law.self_gain.iter().map(row_major).collect(),
            lm: law.mf_gain.iter().map(row_major).collect(),
            lc: law.offset.iter().map(|v| v.as_slice().to_vec()).collect(),
            constant_law: law.is_constant(),
        })
    }

    fn law_index(&self, node: usize) -> usize {
        if self.constant_law {
            0
        } else {
            node
        }
    }

    /// `u = L_self (x - xbar) + L_mf xbar + c`.
    fn control(&self, node: usize, x: &[f64], x_bar: &[f64], dev: &mut [f64], u: &mut [f64]) {
        let li = self.law_index(node);
        for k in 0..self.n {
            dev[k] = x[k] - x_bar[k];
        }
        u.copy_from_slice(&self.lc[li]);
        mv_add(u, &self.lm[li], x_bar);
        mv_add(u, &self.ls[li], dev);
    }

    fn mean_control(&self, node: usize, x_bar: &[f64], u: &mut [f64]) {
        let li = self.law_index(node);
        u.copy_from_slice(&self.lc[li]);
        mv_add(u, &self.lm[li], x_bar);
    }
}

/// Scratch buffers reused across steps.
struct Work {
    dev: Vec<f64>,
    u: Vec<f64>,
    drift: Vec<f64>,
    diff: Vec<f64>,
    cdiff: Vec<f64>,
    shared_drift: Vec<f64>,
    shared_diff: Vec<f64>,
    shared_cdiff: Vec<f64>,
}

/// Simulate one replication with an explicit noise source.
pub fn simulate_with<S: NoiseSource>(
    params: &ModelParams,
    law: &FeedbackLaw,
    cfg: &SimConfig,
    replication: u64,
    noise: &mut S,
    deviation: Option<Unilateral<'_>>,
) -> Result<PopulationPath> {
    cfg.check()?;
    let grid = cfg.grid()?;
    let prep = Prepared::new(params, law, &grid)?;
    if let Some(d) = deviation {
        if d.agent >= cfg.agents {
            return Err(Error::IndexOutOfRange {
                index: d.agent,
                len: cfg.agents,
            });
        }
    }
    run(&prep, params, cfg, &grid, replication, noise, deviation)
}

fn run<S: NoiseSource>(
    prep: &Prepared,
    params: &ModelParams,
    cfg: &SimConfig,
    grid: &TimeGrid,
    replication: u64,
    noise: &mut S,
    deviation: Option<Unilateral<'_>>,
) -> Result<PopulationPath> {
    let (n, r, big_n) = (prep.n, prep.r, cfg.agents);
    let steps = cfg.steps;
    let dt = grid.dt();
    let sq = dt.sqrt();
    let times = grid.nodes();
    let recorded = cfg.recorded();
    let nrec = recorded.len();
    let inv_n = 1.0 / big_n as f64;

    let mut x = vec![0.0; big_n * n];
    let mut x_next = vec![0.0; big_n * n];
    for i in 0..big_n {
        noise.initial(i, &params.init_law, &mut x[i * n..(i + 1) * n]);
    }
    let mut x_bar = params.init_mean.as_slice().to_vec();
    let mut x_avg = vec![0.0; n];

    let mut out_x = Vec::with_capacity((steps + 1) * nrec * n);
    let mut out_u = Vec::with_capacity((steps + 1) * nrec * r);
    let mut out_avg = Vec::with_capacity((steps + 1) * n);
    let mut out_bar = Vec::with_capacity((steps + 1) * n);
    let mut common_dw = Vec::with_capacity(steps);

    let mut w = Work {
        dev: vec![0.0; n],
        u: vec![0.0; r],
        drift: vec![0.0; n],
        diff: vec![0.0; n],
        cdiff: vec![0.0; n],
        shared_drift: vec![0.0; n],
        shared_diff: vec![0.0; n],
        shared_cdiff: vec![0.0; n],
    };
    let mut u_rec = vec![0.0; nrec * r];
    let mut u_bar = vec![0.0; r];

    let average = |x: &[f64], out: &mut [f64]| {
        out.copy_from_slice(&x[0..n]);
        for i in 1..big_n {
            for k in 0..n {
                out[k] += x[i * n + k];
            }
        }
        if big_n > 1 {
            for v in out.iter_mut() {
                *v *= inv_n;
            }
        }
    };

    let control_of = |node: usize, i: usize, xi: &[f64], x_bar: &[f64], w: &mut Work| {
        prep.control(node, xi, x_bar, &mut w.dev, &mut w.u);
        if let Some(d) = deviation {
            if d.agent == i {
                d.rule.adjust(node, times[node], xi, x_bar, &mut w.u);
            }
        }
    };

    average(&x, &mut x_avg);
    for node in 0..=steps {
        out_avg.extend_from_slice(&x_avg);
        out_bar.extend_from_slice(&x_bar);
        for (k, &i) in recorded.iter().enumerate() {
            control_of(node, i, &x[i * n..(i + 1) * n], &x_bar, &mut w);
            u_rec[k * r..(k + 1) * r].copy_from_slice(&w.u);
        }
        for &i in &recorded {
            out_x.extend_from_slice(&x[i * n..(i + 1) * n]);
        }
        out_u.extend_from_slice(&u_rec);
        if node == steps {
            break;
        }

        let off = node * n;
        // Terms shared by every agent.
        w.shared_drift.copy_from_slice(&prep.drift[off..off + n]);
        mv_add(&mut w.shared_drift, &prep.g, &x_avg);
        w.shared_diff.copy_from_slice(&prep.sigma[off..off + n]);
        mv_add(&mut w.shared_diff, &prep.f, &x_avg);
        w.shared_cdiff.copy_from_slice(&prep.sigma0[off..off + n]);
        mv_add(&mut w.shared_cdiff, &prep.f0, &x_avg);

        let dw0 = noise.common() * sq;
        common_dw.push(dw0);

        for i in 0..big_n {
            let xi = &x[i * n..(i + 1) * n];
            control_of(node, i, xi, &x_bar, &mut w);
            w.drift.copy_from_slice(&w.shared_drift);
            mv_add(&mut w.drift, &prep.a, xi);
            mv_add(&mut w.drift, &prep.b, &w.u);
            w.diff.copy_from_slice(&w.shared_diff);
            mv_add(&mut w.diff, &prep.c, xi);
            mv_add(&mut w.diff, &prep.d, &w.u);
            w.cdiff.copy_from_slice(&w.shared_cdiff);
            mv_add(&mut w.cdiff, &prep.c0, xi);
            mv_add(&mut w.cdiff, &prep.d0, &w.u);
            let dwi = noise.idiosyncratic(i) * sq;
            let xn = &mut x_next[i * n..(i + 1) * n];
            for k in 0..n {
                xn[k] = xi[k] + w.drift[k] * dt + w.diff[k] * dwi + w.cdiff[k] * dw0;
            }
        }

        // Mean-field proxy with the same common increment.
        prep.mean_control(node, &x_bar, &mut u_bar);
        w.drift.copy_from_slice(&prep.drift[off..off + n]);
        mv_add(&mut w.drift, &prep.a, &x_bar);
        mv_add(&mut w.drift, &prep.g, &x_bar);
        mv_add(&mut w.drift, &prep.b, &u_bar);
        w.cdiff.copy_from_slice(&prep.sigma0[off..off + n]);
        mv_add(&mut w.cdiff, &prep.c0, &x_bar);
        mv_add(&mut w.cdiff, &prep.f0, &x_bar);
        mv_add(&mut w.cdiff, &prep.d0, &u_bar);
        for k in 0..n {
            x_bar[k] += w.drift[k] * dt + w.cdiff[k] * dw0;
        }

        std::mem::swap(&mut x, &mut x_next);
        if x.iter().chain(&x_bar).any(|v| !(v.abs() <= BLOW_UP_STATE)) {
            return Err(Error::BlowUp {
                step: node + 1,
                replication,
            });
        }
        average(&x, &mut x_avg);
    }

    Ok(PopulationPath {
        times,
        n,
        r,
        agents: big_n,
        recorded,
        x: out_x,
        u: out_u,
        x_avg: out_avg,
        x_bar: out_bar,
        common_dw,
        seed: cfg.seed,
        replication,
    })
}

/// Simulate replication `replication` with the counter-addressed streams.
pub fn simulate_population(
    params: &ModelParams,
    law: &FeedbackLaw,
    cfg: &SimConfig,
    replication: u64,
) -> Result<PopulationPath> {
    let mut noise = StreamNoise::new(cfg.seed, replication, cfg.agents);
    simulate_with(params, law, cfg, replication, &mut noise, None)
}

/// Same as [`simulate_population`] with a unilateral deviation.
pub fn simulate_deviated(
    params: &ModelParams,
    law: &FeedbackLaw,
    cfg: &SimConfig,
    replication: u64,
    deviation: Unilateral<'_>,
) -> Result<PopulationPath> {
    let mut noise = StreamNoise::new(cfg.seed, replication, cfg.agents);
    simulate_with(params, law, cfg, replication, &mut noise, Some(deviation))
}

/// Run `job` for every replication index in parallel and return the results
/// in index order. The first error by index wins.
pub fn for_replications<T, F>(replications: usize, job: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    let results: Vec<Result<T>> = (0..replications as u64).into_par_iter().map(job).collect();
    results.into_iter().collect()
}

/// All replications of `cfg`, in order.
pub fn simulate_replications(
    params: &ModelParams,
    law: &FeedbackLaw,
    cfg: &SimConfig,
) -> Result<Vec<PopulationPath>> {
    for_replications(cfg.replications, |rep| simulate_population(params, law, cfg, rep))
}
