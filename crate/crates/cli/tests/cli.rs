use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mflq_cli::{CommandKind, RunArgs, RunManifest};

fn mflq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mflq")).args(args).output().unwrap()
}

fn write_model(dir: &Path, body: &str) -> String {
    let path = dir.join("model.toml");
    fs::write(&path, body).unwrap();
    path.display().to_string()
}

const NULL_MODEL: &str = r#"
dims = { n = 2, r = 1 }
horizon = { kind = "finite", T = 1.0 }
init = { kind = "dirac", point = [0.0, 0.0] }
"#;

fn stderr_json(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().expect("an error line");
    serde_json::from_str(line).unwrap()
}

#[test]
fn null_model_has_all_zero_curves() {
    let tmp = tempfile::tempdir().unwrap();
    let model = write_model(tmp.path(), NULL_MODEL);
    let out = tmp.path().join("out");
    let res = mflq(&["riccati", "--model", &model, "--steps", "50", "--out", out.to_str().unwrap()]);
    assert!(res.status.success());
    let csv = fs::read_to_string(out.join("p_k_curves.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("t,P_11"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 51);
    for row in rows {
        assert!(row.split(',').skip(1).all(|v| v.parse::<f64>().unwrap() == 0.0), "{row}");
    }
    assert!(out.join("manifest.json").exists());
}

#[test]
fn benchmark_curves_end_at_terminal_values() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    assert!(mflq(&["riccati", "--preset", "paper-sec4", "--out", out.to_str().unwrap()]).status.success());
    let csv = fs::read_to_string(out.join("p_k_curves.csv")).unwrap();
    let last: Vec<f64> = csv.lines().last().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(&last[..11], &[10.0, 0.5, 0.0, 0.0, 0.5, -0.1, 0.0, 0.0, -0.1, -0.25, -0.25]);
}

#[test]
fn exit_codes_follow_the_error_table() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let out = out.to_str().unwrap();

    let res = mflq(&["riccati", "--preset", "missing", "--out", out]);
    assert_eq!(res.status.code(), Some(2));
    assert_eq!(stderr_json(&res)["error"], "config");

    let model = write_model(tmp.path(), "dims = { n = 2 ");
    assert_eq!(mflq(&["riccati", "--model", &model, "--out", out]).status.code(), Some(2));

    let res = mflq(&["riccati", "--preset", "paper-sec4", "--set", "matrices.Q=[[1,2],[0,1]]", "--out", out]);
    assert_eq!(res.status.code(), Some(3));
    assert_eq!(stderr_json(&res)["error"], "validation");

    let res = mflq(&["stationary", "--preset", "paper-sec4", "--out", out]);
    assert_eq!(res.status.code(), Some(4));
    assert_eq!(stderr_json(&res)["error"], "solver");

    // No state weight, so the law leaves the explosive drift alone.
    let model = write_model(
        tmp.path(),
        r#"
dims = { n = 1, r = 1 }
horizon = { kind = "finite", T = 10.0 }
init = { kind = "dirac", point = [1.0] }
[matrices]
A = 20.0
B = 1.0
"#,
    );
    let res = mflq(&["simulate", "--model", &model, "--replications", "2", "--steps", "200", "--agents", "3", "--out", out]);
    assert_eq!(res.status.code(), Some(5));
    assert_eq!(stderr_json(&res)["error"], "simulation");
}

#[test]
fn overrides_and_flags_are_echoed() {
    let args = RunArgs {
        model: None,
        preset: Some("paper-sec4".into()),
        overrides: vec!["matrices.R=0.5".into(), "simulation.seed=9".into()],
        out: "unused".into(),
        seed: None,
        steps: Some(100),
        replications: None,
        agents: Some(7),
        n_list: None,
        svg: false,
    };
    let m = RunManifest::from_args(CommandKind::Simulate, &args).unwrap();
    assert_eq!(m.source, "preset:paper-sec4");
    assert_eq!((m.seed, m.steps, m.agents, m.replications), (9, 100, 7, 256));
    assert_eq!(m.n_list, vec![7]);
    let config = m.config().unwrap();
    let params = config.to_params().unwrap();
    assert_eq!(params.r[(0, 0)], 0.5);
    let sweep = RunManifest::from_args(CommandKind::Sweep, &args).unwrap();
    assert_eq!(sweep.n_list, mflq_cli::DEFAULT_N_LIST.to_vec());
}

#[test]
fn resolved_model_round_trips_for_both_presets() {
    for name in ["paper-sec4", "sticky-price"] {
        let args = RunArgs {
            model: None,
            preset: Some(name.into()),
            overrides: vec![],
            out: "unused".into(),
            seed: None,
            steps: None,
            replications: None,
            agents: None,
            n_list: None,
            svg: false,
        };
        let m = RunManifest::from_args(CommandKind::Riccati, &args).unwrap();
        let direct = mflq_core::model::presets::config(name).unwrap().to_params().unwrap();
        assert_eq!(m.config().unwrap().to_params().unwrap(), direct, "{name}");
    }
}

#[test]
fn sweep_and_nash_write_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("sweep");
    let res = mflq(&[
        "sweep", "--preset", "paper-sec4", "--replications", "8", "--steps", "200",
        "--n-list", "4,8,16,32", "--out", out.to_str().unwrap(),
    ]);
    assert!(res.status.success());
    let csv = fs::read_to_string(out.join("epsilon_sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("sweep.json")).unwrap()).unwrap();
    assert!(report["fit"]["slope"].as_f64().unwrap() < 0.0);
    assert_eq!(report["ratio_variances"].as_array().unwrap().len(), 3);

    let out = tmp.path().join("nash");
    let res = mflq(&[
        "nash", "--preset", "paper-sec4", "--replications", "8", "--steps", "200",
        "--n-list", "8", "--out", out.to_str().unwrap(),
    ]);
    assert!(res.status.code() == Some(0) || res.status.code() == Some(1));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("nash_report.json")).unwrap()).unwrap();
    assert_eq!(report["report"]["delta_j"].as_array().unwrap().len(), 11);
    assert_eq!(report["checks"].as_array().unwrap().len(), 1);
}

#[test]
fn stationary_report_on_infinite_horizon() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let res = mflq(&[
        "stationary", "--preset", "paper-sec4", "--set", "horizon={kind=\"infinite\"}",
        "--set", "signals={}", "--out", out.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("stationary.json")).unwrap()).unwrap();
    assert_eq!(report["certified"], true);
    assert!(report["residuals"]["p"].as_f64().unwrap() < 1e-8);
}
