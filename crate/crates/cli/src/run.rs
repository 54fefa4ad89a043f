use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use mflq_core::export::{
    write_epsilon_csv, write_json, write_riccati_csv, write_trajectories_csv, StationaryReport,
};
use mflq_core::model::{validate_model, CheckStatus, Horizon, ModelConfig, ModelParams};
use mflq_core::riccati::{feedback_law, solve_riccati, FeedbackLaw, RangePolicy, RiccatiSolution, TimeGrid};
use mflq_core::simulate::{
    epsilon_metric, evaluate_cost, simulate_population, simulate_replications, AgentCost,
    EpsilonEstimate, PopulationPath, Record, SimConfig,
};
use mflq_core::stationary::{solve_stationary, StationaryOptions};
use mflq_core::verify::{
    epsilon_rate_fit, epsilon_sweep, half_rate_constant, nash_report, ratio_variances,
    standard_suite, NashReport, RateFit, RatioVariance, SweepPoint,
};
use mflq_core::{Error, Result};
use serde::Serialize;

use crate::manifest::{CommandKind, RunManifest};
use crate::svg::{line_chart, Series};

/// What a run reports on standard output, and whether its built-in checks
/// passed.
#[derive(Debug, Default)]
pub struct Outcome {
    pub lines: Vec<String>,
    pub checks_passed: bool,
}

struct Ctx<'a> {
    manifest: &'a RunManifest,
    config: ModelConfig,
    params: ModelParams,
    out: &'a Path,
    lines: Vec<String>,
}

impl Ctx<'_> {
    fn file(&self, name: &str) -> Result<BufWriter<File>> {
        Ok(BufWriter::new(File::create(self.out.join(name))?))
    }

    fn svg(&self, name: &str, chart: impl FnOnce() -> String) -> Result<()> {
        if self.manifest.svg {
            self.file(name)?.write_all(chart().as_bytes())?;
        }
        Ok(())
    }

    fn say(&mut self, line: String) {
        self.lines.push(line);
    }

    fn sim_config(&self, agents: usize, replications: usize) -> Result<SimConfig> {
        SimConfig::new(
            &self.params,
            agents,
            self.manifest.steps,
            replications,
            self.manifest.seed,
            self.config.simulation.window,
        )
    }
}

/// Run a manifest, writing its artifacts and `manifest.json` into `out`.
pub fn execute(manifest: &RunManifest, out: &Path) -> Result<Outcome> {
    let config = manifest.config()?;
    let mut params = config.to_params()?;
    let report = validate_model(&mut params)?;
    if !report.passed() {
        let failed: Vec<String> = report
            .checks
            .iter()
            .filter(|c| c.status == CheckStatus::Fail)
            .map(|c| format!("{}: {}", c.name, c.detail))
            .collect();
        return Err(Error::InvalidParameter {
            name: "model",
            reason: failed.join("; "),
        });
    }
    fs::create_dir_all(out)?;
    write_json(BufWriter::new(File::create(out.join("manifest.json"))?), manifest)?;

    let mut ctx = Ctx {
        manifest,
        config,
        params,
        out,
        lines: Vec::new(),
    };
    let checks_passed = match manifest.command {
        CommandKind::Riccati => riccati(&mut ctx).map(|_| true)?,
        CommandKind::Stationary => stationary(&mut ctx)?,
        CommandKind::Simulate => simulate(&mut ctx).map(|_| true)?,
        CommandKind::Sweep => sweep(&mut ctx).map(|_| true)?,
        CommandKind::Nash => nash(&mut ctx)?,
        CommandKind::ReproduceSec4 => reproduce(&mut ctx)?,
    };
    Ok(Outcome {
        lines: ctx.lines,
        checks_passed,
    })
}

fn finite_end(params: &ModelParams, what: &str) -> Result<f64> {
    params.horizon.end().ok_or_else(|| {
        Error::Precondition(format!("{what} needs a finite horizon; use `stationary` for T = infinity"))
    })
}

fn solve_finite(ctx: &Ctx) -> Result<(RiccatiSolution, FeedbackLaw)> {
    let t_end = finite_end(&ctx.params, "riccati")?;
    let grid = TimeGrid::new(t_end, ctx.manifest.steps)?;
    let sol = solve_riccati(&ctx.params, &grid, RangePolicy::Strict)?;
    let law = feedback_law(&sol, &ctx.params)?;
    Ok((sol, law))
}

fn law(ctx: &Ctx) -> Result<FeedbackLaw> {
    match ctx.params.horizon {
        Horizon::Finite(_) => Ok(solve_finite(ctx)?.1),
        Horizon::Infinite => Ok(solve_stationary(&ctx.params, &StationaryOptions::default())?.law),
    }
}

fn fmt_matrix(m: &mflq_core::DMatrix<f64>) -> String {
    let rows: Vec<String> = (0..m.nrows())
        .map(|i| {
            let r: Vec<String> = (0..m.ncols()).map(|j| format!("{}", m[(i, j)])).collect();
            format!("[{}]", r.join(", "))
        })
        .collect();
    format!("[{}]", rows.join(", "))
}

fn write_curves(ctx: &mut Ctx) -> Result<(RiccatiSolution, FeedbackLaw)> {
    let (sol, law) = solve_finite(ctx)?;
    write_riccati_csv(ctx.file("p_k_curves.csv")?, &sol, &law)?;
    ctx.svg("p_k_curves.svg", || {
        let n = ctx.params.n();
        let times = sol.grid.nodes();
        let mut series = Vec::new();
        for (name, mats) in [("P", &sol.p), ("K", &sol.k)] {
            for i in 0..n {
                for j in i..n {
                    series.push(Series {
                        name: format!("{name}_{}{}", i + 1, j + 1),
                        points: times.iter().zip(mats.iter()).map(|(&t, m)| (t, m[(i, j)])).collect(),
                    });
                }
            }
        }
        line_chart("Riccati solutions", "t", "value", &series, false)
    })?;
    let last = sol.grid.len() - 1;
    ctx.say(format!("P(T) = {}", fmt_matrix(&sol.p[last])));
    ctx.say(format!("K(T) = {}", fmt_matrix(&sol.k[last])));
    ctx.say(format!("P(0) = {}", fmt_matrix(&sol.p[0])));
    ctx.say(format!("K(0) = {}", fmt_matrix(&sol.k[0])));
    if !sol.range_ok.iter().all(|&ok| ok) {
        ctx.say("warning: range conditions fail at some nodes".into());
    }
    Ok((sol, law))
}

fn riccati(ctx: &mut Ctx) -> Result<()> {
    write_curves(ctx).map(|_| ())
}

fn stationary(ctx: &mut Ctx) -> Result<bool> {
    let sol = solve_stationary(&ctx.params, &StationaryOptions::default())?;
    let report = StationaryReport::new(&sol);
    write_json(ctx.file("stationary.json")?, &report)?;
    ctx.say(format!("P = {}", fmt_matrix(&sol.p)));
    ctx.say(format!("K = {}", fmt_matrix(&sol.k)));
    ctx.say(format!(
        "residuals: P {:.3e}, K {:.3e}, phi {:.3e}",
        sol.residuals.p, sol.residuals.k, sol.residuals.phi
    ));
    ctx.say(format!("certified: {}", sol.is_certified()));
    Ok(sol.is_certified())
}

#[derive(Serialize)]
struct SimulationSummary {
    agents: usize,
    replications: usize,
    cost: AgentCost,
    epsilon: EpsilonEstimate,
}

fn fan_chart(path: &PopulationPath, component: usize) -> String {
    let mut series: Vec<Series> = path
        .recorded
        .iter()
        .map(|&a| Series {
            name: String::new(),
            points: (0..path.nodes())
                .filter_map(|k| path.x_at(k, a).map(|x| (path.times[k], x[component])))
                .collect(),
        })
        .collect();
    series.push(Series {
        name: "xbar".into(),
        points: (0..path.nodes()).map(|k| (path.times[k], path.x_bar_at(k)[component])).collect(),
    });
    line_chart(&format!("x_{}", component + 1), "t", "state", &series, false)
}

fn write_fan(ctx: &Ctx, law: &FeedbackLaw) -> Result<f64> {
    let cfg = ctx.sim_config(ctx.manifest.agents, 1)?;
    let path = simulate_population(&ctx.params, law, &cfg, 0)?;
    write_trajectories_csv(ctx.file("trajectories.csv")?, std::slice::from_ref(&path))?;
    for i in 0..ctx.params.n() {
        ctx.svg(&format!("trajectories_x{}.svg", i + 1), || fan_chart(&path, i))?;
    }
    Ok(path.x.iter().fold(0.0f64, |m, v| m.max(v.abs())))
}

fn simulate(ctx: &mut Ctx) -> Result<()> {
    let law = law(ctx)?;
    write_fan(ctx, &law)?;
    let cfg = ctx
        .sim_config(ctx.manifest.agents, ctx.manifest.replications)?
        .with_record(Record::Agents(vec![0]));
    let paths = simulate_replications(&ctx.params, &law, &cfg)?;
    let summary = SimulationSummary {
        agents: cfg.agents,
        replications: cfg.replications,
        cost: evaluate_cost(&paths, &ctx.params, 0)?,
        epsilon: epsilon_metric(&paths)?,
    };
    write_json(ctx.file("summary.json")?, &summary)?;
    ctx.say(format!(
        "J_0 = {} +- {} over {} replications",
        summary.cost.total.mean, summary.cost.total.se, summary.replications
    ));
    ctx.say(format!("eps({}) = {} +- {}", cfg.agents, summary.epsilon.value, summary.epsilon.se));
    if summary.cost.tail_warning {
        ctx.say("warning: the last tenth of the window carries more than 1% of the cost".into());
    }
    Ok(())
}

#[derive(Serialize)]
struct SweepReport {
    points: Vec<SweepPoint>,
    fit: Option<RateFit>,
    half_rate_constant: f64,
    ratio_variances: Vec<RatioVariance>,
}

fn epsilon_chart(points: &[SweepPoint], c: f64) -> String {
    let series = [
        Series {
            name: "eps(N)".into(),
            points: points.iter().map(|p| (p.agents as f64, p.epsilon.value)).collect(),
        },
        Series {
            name: "c/sqrt(N)".into(),
            points: points
                .iter()
                .map(|p| (p.agents as f64, c / (p.agents as f64).sqrt()))
                .collect(),
        },
    ];
    line_chart("eps(N)", "N", "eps", &series, true)
}

fn sweep_points(ctx: &mut Ctx, law: &FeedbackLaw) -> Result<SweepReport> {
    let cfg = ctx.sim_config(ctx.manifest.agents, ctx.manifest.replications)?;
    let points = epsilon_sweep(&ctx.params, law, &cfg, &ctx.manifest.n_list)?;
    write_epsilon_csv(ctx.file("epsilon_sweep.csv")?, &points)?;
    let pts: Vec<(f64, f64)> = points.iter().map(|p| (p.agents as f64, p.epsilon.value)).collect();
    let fit = match epsilon_rate_fit(&pts) {
        Ok(f) => Some(f),
        Err(Error::TooFewPoints { .. }) => None,
        Err(e) => return Err(e),
    };
    let c = half_rate_constant(&pts)?;
    ctx.svg("epsilon_sweep.svg", || epsilon_chart(&points, c))?;
    for p in &points {
        ctx.say(format!("eps({}) = {} +- {}", p.agents, p.epsilon.value, p.epsilon.se));
    }
    if let Some(f) = &fit {
        ctx.say(format!(
            "log-log slope {:.4} (95% CI {:.4} .. {:.4})",
            f.slope, f.slope_ci95.0, f.slope_ci95.1
        ));
    }
    Ok(SweepReport {
        ratio_variances: ratio_variances(&points),
        points,
        fit,
        half_rate_constant: c,
    })
}

fn sweep(ctx: &mut Ctx) -> Result<()> {
    let law = law(ctx)?;
    let report = sweep_points(ctx, &law)?;
    write_json(ctx.file("sweep.json")?, &report)
}

#[derive(Serialize)]
struct NashCheck {
    agents: usize,
    min_delta_j: f64,
    min_delta_j_se: f64,
    epsilon_hat: f64,
    within_epsilon: bool,
}

#[derive(Serialize)]
struct NashOutput<'a> {
    report: &'a NashReport,
    checks: Vec<NashCheck>,
}

fn nash(ctx: &mut Ctx) -> Result<bool> {
    let law = law(ctx)?;
    let cfg = ctx.sim_config(ctx.manifest.agents, ctx.manifest.replications)?;
    let suite = standard_suite(ctx.params.n(), ctx.params.r_dim());
    let report = nash_report(&ctx.params, &law, &cfg, &suite, &ctx.manifest.n_list)?;
    write_epsilon_csv(ctx.file("epsilon_sweep.csv")?, &report.epsilon)?;
    let checks: Vec<NashCheck> = ctx
        .manifest
        .n_list
        .iter()
        .map(|&agents| {
            let worst = report
                .delta_j
                .iter()
                .filter(|d| d.agents == agents)
                .min_by(|a, b| a.delta.mean.total_cmp(&b.delta.mean))
                .expect("suite is nonempty");
            let epsilon_hat = report.epsilon_hat(agents);
            NashCheck {
                agents,
                min_delta_j: worst.delta.mean,
                min_delta_j_se: worst.delta.se,
                epsilon_hat,
                within_epsilon: worst.delta.mean >= -epsilon_hat,
            }
        })
        .collect();
    for c in &checks {
        ctx.say(format!(
            "N = {}: min dJ = {} +- {}, eps_hat = {}, {}",
            c.agents,
            c.min_delta_j,
            c.min_delta_j_se,
            c.epsilon_hat,
            if c.within_epsilon { "ok" } else { "VIOLATED" }
        ));
    }
    let passed = checks.iter().all(|c| c.within_epsilon);
    write_json(ctx.file("nash_report.json")?, &NashOutput { report: &report, checks })?;
    Ok(passed)
}

#[derive(Serialize)]
struct Check {
    name: &'static str,
    passed: bool,
    detail: String,
}

fn reproduce(ctx: &mut Ctx) -> Result<bool> {
    let (sol, law) = write_curves(ctx)?;
    let last = sol.grid.len() - 1;
    let h = &ctx.params.h;
    let terminal = sol.p[last] == *h && sol.k[last] == -(h * &ctx.params.gamma0);
    let max_state = write_fan(ctx, &law)?;
    let report = sweep_points(ctx, &law)?;
    let trend = match &report.fit {
        Some(f) => f.slope < 0.0,
        None => report.points.first().map(|p| p.epsilon.value) > report.points.last().map(|p| p.epsilon.value),
    };
    let checks = vec![
        Check {
            name: "terminal-values",
            passed: terminal,
            detail: "P(T) = H and K(T) = -H Gamma0 exactly".into(),
        },
        Check {
            name: "epsilon-decreasing",
            passed: trend,
            detail: match &report.fit {
                Some(f) => format!("log-log slope {}", f.slope),
                None => "first vs last population size".into(),
            },
        },
        Check {
            name: "bounded-trajectories",
            passed: max_state.is_finite(),
            detail: format!("max |x| = {max_state}"),
        },
    ];
    for c in &checks {
        ctx.say(format!("{}: {} ({})", c.name, if c.passed { "pass" } else { "FAIL" }, c.detail));
    }
    write_json(ctx.file("sweep.json")?, &report)?;
    write_json(ctx.file("checks.json")?, &checks)?;
    Ok(checks.iter().all(|c| c.passed))
}
