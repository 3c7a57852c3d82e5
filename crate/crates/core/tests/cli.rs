use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use skewcast::learner::FitModel;

fn skewcast(args: &[&str], dir: &Path, threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_skewcast"));
    cmd.args(args).current_dir(dir).env_remove("SKEWCAST_THREADS");
    if let Some(t) = threads {
        cmd.env("SKEWCAST_THREADS", t);
    }
    cmd.output().expect("binary runs")
}

fn ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

const GEN: &str = r#"{"n_items": 6, "n_days": 420, "seed": 3}"#;
const PLAN: &str = r#"{"panel": {"path": "panel.csv"}, "train_window_days": 200, "n_versions": 2,
    "arms": ["E1", "E3-1.5", "E4", "E4-PB", "E5"], "learner": {"rounds": 8}}"#;

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("gen.json"), GEN).unwrap();
    fs::write(dir.path().join("plan.json"), PLAN).unwrap();
    ok(&skewcast(
        &["gen", "--config", "gen.json", "--out", "panel.csv"],
        dir.path(),
        None,
    ));
    dir
}

#[test]
fn gen_writes_a_panel() {
    let dir = setup();
    let p = skewcast::panel::read_panel(dir.path().join("panel.csv")).unwrap();
    assert_eq!(p.len(), 6 * 420);
    assert_eq!(p.feature_names(), skewcast::datagen::FEATURE_NAMES);
}

#[test]
fn fit_saves_a_loadable_model_and_report() {
    let dir = setup();
    ok(&skewcast(
        &[
            "fit",
            "--panel",
            "panel.csv",
            "--arm",
            "E4-PB",
            "--model-out",
            "m/model.json",
            "--report-out",
            "fit.csv",
        ],
        dir.path(),
        None,
    ));
    let m = FitModel::load(&dir.path().join("m/model.json")).unwrap();
    assert_eq!(
        m.bias_corrector.kind(),
        skewcast::biascorr::CorrectorKind::PredictionBinned
    );
    let report = fs::read_to_string(dir.path().join("fit.csv")).unwrap();
    assert_eq!(
        report.lines().next().unwrap(),
        "y_transformed,pred_transformed,y_raw,pred_raw"
    );
    assert_eq!(report.lines().count(), 1 + 6 * 420);

    let arm = r#"{"id": "custom", "transform": {"kind": "identity"}, "loss": {"kind": "tweedie", "power": 1.4, "link": "log"}}"#;
    fs::write(dir.path().join("learner.json"), r#"{"rounds": 3, "max_depth": 2}"#).unwrap();
    ok(&skewcast(
        &[
            "fit",
            "--panel",
            "panel.csv",
            "--arm",
            arm,
            "--model-out",
            "t.json",
            "--learner",
            "learner.json",
        ],
        dir.path(),
        None,
    ));
    let t = FitModel::load(&dir.path().join("t.json")).unwrap();
    assert_eq!(t.config.rounds, 3);
}

#[test]
fn backtest_output_is_independent_of_thread_count() {
    let dir = setup();
    ok(&skewcast(
        &["backtest", "--plan", "plan.json", "--out-dir", "one"],
        dir.path(),
        Some("1"),
    ));
    ok(&skewcast(
        &["backtest", "--plan", "plan.json", "--out-dir", "four"],
        dir.path(),
        Some("4"),
    ));
    for f in ["metrics.csv", "summary.csv", "report.json"] {
        let a = fs::read(dir.path().join("one").join(f)).unwrap();
        let b = fs::read(dir.path().join("four").join(f)).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b, "{f} differs");
    }
    let metrics = fs::read_to_string(dir.path().join("one/metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 1 + 5 * 2 * 3);
}

#[test]
fn ladder_and_sweep_write_trend_tables() {
    let dir = setup();
    ok(&skewcast(
        &["ladder", "--plan", "plan.json", "--out-dir", "ladder"],
        dir.path(),
        None,
    ));
    let ladder = fs::read_to_string(dir.path().join("ladder/trend.csv")).unwrap();
    assert!(ladder.starts_with("scheme,horizon_weeks,"));
    assert_eq!(ladder.lines().count(), 1 + 4 * 3);

    ok(&skewcast(
        &[
            "sweep",
            "--plan",
            "plan.json",
            "--out-dir",
            "sweep",
            "--powers",
            "1.2,1.8",
        ],
        dir.path(),
        None,
    ));
    let sweep = fs::read_to_string(dir.path().join("sweep/trend.csv")).unwrap();
    assert!(sweep.starts_with("power,horizon_weeks,"));
    assert_eq!(sweep.lines().count(), 1 + 2 * 3);
    assert!(dir.path().join("sweep/trend.json").is_file());
}

#[test]
fn convexity_table_has_one_row_per_grid_point() {
    let dir = tempfile::tempdir().unwrap();
    ok(&skewcast(
        &["convexity", "--actual", "100", "--grid", "10:190:10", "--out", "c.csv"],
        dir.path(),
        None,
    ));
    let csv = fs::read_to_string(dir.path().join("c.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 20);
    assert_eq!(lines[0].split(',').count(), 6);
    assert!(lines[1].starts_with("10,"));
    assert!(lines[19].starts_with("190,"));
}

#[test]
fn configuration_problems_exit_with_2() {
    let dir = setup();
    fs::write(dir.path().join("bad.json"), r#"{"n_items": 2, "colour": 1}"#).unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["gen", "--config", "bad.json", "--out", "x.csv"],
        vec!["fit", "--panel", "panel.csv", "--arm", "E42", "--model-out", "x.json"],
        vec!["convexity", "--actual", "100", "--grid", "10:5:1", "--out", "x.csv"],
        vec!["sweep", "--plan", "plan.json", "--out-dir", "s", "--powers", "1.5,1.2"],
        vec!["frobnicate"],
    ];
    for args in cases {
        assert_eq!(code(&skewcast(&args, dir.path(), None)), 2, "{args:?}");
    }
    let out = skewcast(
        &["backtest", "--plan", "plan.json", "--out-dir", "o"],
        dir.path(),
        Some("zero"),
    );
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("SKEWCAST_THREADS"));
}

#[test]
fn data_problems_exit_with_3() {
    let dir = setup();
    fs::write(dir.path().join("neg.csv"), "item_id,day,sales\na,2020-01-01,-1\n").unwrap();
    for args in [
        vec!["fit", "--panel", "missing.csv", "--arm", "E4", "--model-out", "x.json"],
        vec!["fit", "--panel", "neg.csv", "--arm", "E4", "--model-out", "x.json"],
    ] {
        let out = skewcast(&args, dir.path(), None);
        assert_eq!(code(&out), 3, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}
