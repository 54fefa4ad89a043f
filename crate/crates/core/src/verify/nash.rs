//! Unilateral deviation experiments and the `eps(N)` sweep.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::fit::{epsilon_rate_fit, half_rate_constant, RateFit};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::riccati::FeedbackLaw;
use crate::rng::{stream, StreamKind};
use crate::simulate::{
    epsilon_from_integrals, epsilon_integral, for_replications, path_cost, simulate_deviated,
    simulate_population, ControlOverride, EpsilonEstimate, Estimate, Record, SimConfig,
    Unilateral,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DeviationKind {
    /// `(1 + delta) u`.
    GainScale { delta: f64 },
    /// `u + offset`.
    ConstantOffset { offset: Vec<f64> },
    /// `u + delta (x - xbar)`, `delta` given row-major.
    GainPerturb { rows: usize, cols: usize, delta: Vec<f64> },
    /// Replace `u` by a deterministic piecewise-constant control with
    /// Gaussian levels of standard deviation `scale`.
    OpenLoop { segments: usize, scale: f64, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Deviation {
    pub kind: DeviationKind,
    pub target_agent: usize,
}

impl Deviation {
    pub fn new(kind: DeviationKind) -> Self {
        Deviation {
            kind,
            target_agent: 0,
        }
    }

    pub fn label(&self) -> String {
        match &self.kind {
            DeviationKind::GainScale { delta } => format!("gain-scale({delta:+})"),
            DeviationKind::ConstantOffset { offset } => format!("offset({offset:?})"),
            DeviationKind::GainPerturb { delta, .. } => format!("gain-perturb({delta:?})"),
            DeviationKind::OpenLoop { seed, scale, .. } => {
                format!("open-loop(seed {seed}, scale {scale})")
            }
        }
    }

    fn check(&self, n: usize, r: usize) -> Result<()> {
        let bad = |reason: String| Error::InvalidParameter {
            name: "deviation",
            reason,
        };
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match &self.kind {
            DeviationKind::GainScale { delta } if !delta.is_finite() => {
                Err(bad("non-finite magnitude".into()))
            }
            DeviationKind::ConstantOffset { offset } if offset.len() != r || !finite(offset) => {
                Err(bad(format!("offset needs {r} finite components")))
            }
            DeviationKind::GainPerturb { rows, cols, delta }
                if *rows != r || *cols != n || delta.len() != r * n || !finite(delta) =>
            {
                Err(bad(format!("gain perturbation needs a finite {r}x{n} matrix")))
            }
            DeviationKind::OpenLoop { segments, scale, .. }
                if *segments == 0 || !scale.is_finite() =>
            {
                Err(bad("open-loop control needs segments >= 1 and a finite scale".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Deviation suite: gain scalings `+-0.1, +-0.5, +-1`, constant offsets
/// `+-0.5`, a gain perturbation and two random open-loop controls.
pub fn standard_suite(n: usize, r: usize) -> Vec<Deviation> {
    let mut out = Vec::new();
    for delta in [-1.0, -0.5, -0.1, 0.1, 0.5, 1.0] {
        out.push(Deviation::new(DeviationKind::GainScale { delta }));
    }
    for v in [-0.5, 0.5] {
        out.push(Deviation::new(DeviationKind::ConstantOffset {
            offset: vec![v; r],
        }));
    }
    out.push(Deviation::new(DeviationKind::GainPerturb {
        rows: r,
        cols: n,
        delta: vec![0.2; r * n],
    }));
    for seed in [1, 2] {
        out.push(Deviation::new(DeviationKind::OpenLoop {
            segments: 16,
            scale: 1.0,
            seed,
        }));
    }
    out
}

enum Rule {
    Scale(f64),
    Offset(Vec<f64>),
    Perturb(DMatrix<f64>),
    OpenLoop { levels: Vec<f64>, segments: usize, steps: usize, r: usize },
}

impl ControlOverride for Rule {
    fn adjust(&self, node: usize, _t: f64, x: &[f64], x_bar: &[f64], u: &mut [f64]) {
        match self {
            Rule::Scale(delta) => u.iter_mut().for_each(|v| *v *= 1.0 + delta),
            Rule::Offset(off) => u.iter_mut().zip(off).for_each(|(v, o)| *v += o),
            Rule::Perturb(m) => {
                for (i, v) in u.iter_mut().enumerate() {
                    *v += (0..x.len()).map(|j| m[(i, j)] * (x[j] - x_bar[j])).sum::<f64>();
                }
            }
            Rule::OpenLoop {
                levels,
                segments,
                steps,
                r,
            } => {
                let s = ((node * segments) / steps).min(segments - 1);
                u.copy_from_slice(&levels[s * r..(s + 1) * r]);
            }
        }
    }
}

fn rule_for(dev: &Deviation, r: usize, steps: usize) -> Rule {
    match &dev.kind {
        DeviationKind::GainScale { delta } => Rule::Scale(*delta),
        DeviationKind::ConstantOffset { offset } => Rule::Offset(offset.clone()),
        DeviationKind::GainPerturb { rows, cols, delta } => {
            Rule::Perturb(DMatrix::from_row_slice(*rows, *cols, delta))
        }
        DeviationKind::OpenLoop {
            segments,
            scale,
            seed,
        } => {
            let mut rng = stream(*seed, 0, dev.target_agent as u64, StreamKind::Deviation);
            let levels = (0..segments * r)
                .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
                .collect();
            Rule::OpenLoop {
                levels,
                segments: *segments,
                steps,
                r,
            }
        }
    }
}

/// Paired estimate of `J_i(deviation) - J_i(law)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaJ {
    pub label: String,
    pub agents: usize,
    pub delta: Estimate,
    pub base: Estimate,
    pub deviated: Estimate,
}

/// Run both arms on the same random streams for every replication.
pub fn deviation_experiment(
    params: &ModelParams,
    law: &FeedbackLaw,
    cfg: &SimConfig,
    deviation: &Deviation,
) -> Result<DeltaJ> {
    deviation.check(params.n(), params.r_dim())?;
    let agent = deviation.target_agent;
    if agent >= cfg.agents {
        return Err(Error::IndexOutOfRange {
            index: agent,
            len: cfg.agents,
        });
    }
    let cfg = cfg.clone().with_record(Record::Agents(vec![agent]));
    let rule = rule_for(deviation, params.r_dim(), cfg.steps);
    let unilateral = Unilateral { agent, rule: &rule };
    let pairs = for_replications(cfg.replications, |rep| {
        let base = simulate_population(params, law, &cfg, rep)?;
        let dev = simulate_deviated(params, law, &cfg, rep, unilateral)?;
        Ok((
            path_cost(&base, params, agent)?.total(),
            path_cost(&dev, params, agent)?.total(),
        ))
    })?;
    let base: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let dev: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let diff: Vec<f64> = pairs.iter().map(|p| p.1 - p.0).collect();
    Ok(DeltaJ {
        label: deviation.label(),
        agents: cfg.agents,
        delta: Estimate::from_samples(&diff),
        base: Estimate::from_samples(&base),
        deviated: Estimate::from_samples(&dev),
    })
}

/// `eps(N)` at one population size, with the per-replication integrals kept
/// for paired comparisons.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub agents: usize,
    pub epsilon: EpsilonEstimate,
    #[serde(skip)]
    pub integrals: Vec<f64>,
}

/// `eps(N)` over `n_list`. Agent streams do not depend on `N`, so the points
/// share random numbers.
pub fn epsilon_sweep(
    params: &ModelParams,
    law: &FeedbackLaw,
    cfg: &SimConfig,
    n_list: &[usize],
) -> Result<Vec<SweepPoint>> {
    n_list
        .iter()
        .map(|&agents| {
            let c = cfg.clone().with_agents(agents).with_record(Record::MeanOnly);
            let integrals = for_replications(c.replications, |rep| {
                Ok(epsilon_integral(&simulate_population(params, law, &c, rep)?))
            })?;
            Ok(SweepPoint {
                agents,
                epsilon: epsilon_from_integrals(&integrals)?,
                integrals,
            })
        })
        .collect()
}

/// Delta-method variance of `log eps(N_b) - log eps(N_a)` for adjacent sweep
/// points, with the measured covariance and with the covariance dropped as
/// for independent sampling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioVariance {
    pub n_a: usize,
    pub n_b: usize,
    pub paired: f64,
    pub independent: f64,
}

pub fn ratio_variances(points: &[SweepPoint]) -> Vec<RatioVariance> {
    points
        .windows(2)
        .map(|w| {
            let (a, b) = (&w[0].integrals, &w[1].integrals);
            let m = a.len().min(b.len());
            let (a, b) = (&a[..m], &b[..m]);
            let mf = m as f64;
            let ma = a.iter().sum::<f64>() / mf;
            let mb = b.iter().sum::<f64>() / mf;
            let var = |v: &[f64], mean: f64| {
                v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (mf - 1.0) / mf
            };
            let cov = a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - ma) * (y - mb))
                .sum::<f64>()
                / (mf - 1.0)
                / mf;
            let independent = 0.25 * (var(a, ma) / (ma * ma) + var(b, mb) / (mb * mb));
            RatioVariance {
                n_a: w[0].agents,
                n_b: w[1].agents,
                paired: independent - 0.5 * cov / (ma * mb),
                independent,
            }
        })
        .collect()
}

/// Deviation results over a population sweep with the fitted `eps(N)` rate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NashReport {
    pub delta_j: Vec<DeltaJ>,
    pub epsilon: Vec<SweepPoint>,
    pub epsilon_fit: Option<RateFit>,
    /// `c` in `eps_hat(N) = c / sqrt(N)`, fitted from the sweep.
    pub half_rate_constant: f64,
    /// Most negative `delta_j` mean.
    pub worst_case: Option<DeltaJ>,
}

impl NashReport {
    pub fn epsilon_hat(&self, agents: usize) -> f64 {
        self.half_rate_constant / (agents as f64).sqrt()
    }
}

/// Run `suite` at every population size in `n_list` and the `eps(N)` sweep.
pub fn nash_report(
    params: &ModelParams,
    law: &FeedbackLaw,
    cfg: &SimConfig,
    suite: &[Deviation],
    n_list: &[usize],
) -> Result<NashReport> {
    let epsilon = epsilon_sweep(params, law, cfg, n_list)?;
    let pts: Vec<(f64, f64)> = epsilon
        .iter()
        .map(|p| (p.agents as f64, p.epsilon.value))
        .collect();
    let epsilon_fit = if n_list.len() >= 4 {
        Some(epsilon_rate_fit(&pts)?)
    } else {
        None
    };
    let mut delta_j = Vec::new();
    for &agents in n_list {
        let c = cfg.clone().with_agents(agents);
        for dev in suite {
            delta_j.push(deviation_experiment(params, law, &c, dev)?);
        }
    }
    let worst_case = delta_j
        .iter()
        .min_by(|a, b| a.delta.mean.total_cmp(&b.delta.mean))
        .cloned();
    Ok(NashReport {
        delta_j,
        half_rate_constant: half_rate_constant(&pts)?,
        epsilon,
        epsilon_fit,
        worst_case,
    })
}

/// Apply a deviation's control rule to a law's control, for inspection.
pub fn deviated_control(
    dev: &Deviation,
    r: usize,
    steps: usize,
    node: usize,
    x: &DVector<f64>,
    x_bar: &DVector<f64>,
    u: &DVector<f64>,
) -> DVector<f64> {
    let mut out = u.clone();
    rule_for(dev, r, steps).adjust(node, 0.0, x.as_slice(), x_bar.as_slice(), out.as_mut_slice());
    out
}
