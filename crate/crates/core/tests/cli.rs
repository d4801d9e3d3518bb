use std::path::Path;
use std::process::{Command, Output};

use btl_cpd::io::{read_observations, segmentation_from_json, IngestOptions, Labels};
use btl_cpd::simulate::{generate, ChangeSpec, Scenario};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_btl-cpd"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawn btl-cpd")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn simulate(dir: &Path) {
    std::fs::write(dir.join("s.cfg"), "n = 4\ndelta = 80\nchanges = I\nseed = 2\n").unwrap();
    let o = run(dir, &["simulate", "--config", "s.cfg", "--out", "sim.csv"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn simulate_writes_series_and_truth() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path());
    let truth = segmentation_from_json(&std::fs::read_to_string(dir.path().join("sim.truth.json")).unwrap()).unwrap();
    assert_eq!(truth.change_points(), &[81]);

    // the file holds exactly the library's simulated series
    let sc = Scenario::complete(4, 80, vec![ChangeSpec::Reverse], 2).unwrap();
    let expected = generate(&sc).unwrap().series;
    let opts = IngestOptions { items: Some(Labels::indices(4)), edges: None };
    let file = std::fs::File::open(dir.path().join("sim.csv")).unwrap();
    assert_eq!(read_observations(file, &opts).unwrap().series, expected);
}

#[test]
fn detect_evaluate_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulate(d);
    let o = run(d, &["detect", "--in", "sim.csv", "--method", "dplr", "--gamma", "8", "--out", "est.json"]);
    assert!(o.status.success());
    let o = run(d, &["evaluate", "--est", "est.json", "--truth", "sim.truth.json"]);
    let text = stdout(&o);
    assert!(text.contains("k_true 1\n"), "{text}");
    assert!(text.lines().any(|l| l.starts_with("category ")));

    // detect to stdout matches the file output
    let o = run(d, &["detect", "--in", "sim.csv", "--method", "dplr", "--gamma", "8"]);
    assert_eq!(o.stdout, std::fs::read(d.join("est.json")).unwrap());
}

#[test]
fn evaluate_reports_exact_match() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulate(d);
    let o = run(d, &["evaluate", "--est", "sim.truth.json", "--truth", "sim.truth.json"]);
    assert_eq!(stdout(&o), "hausdorff 0\nk_hat 1\nk_true 1\ncategory exact\n");
}

#[test]
fn tune_writes_table_and_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulate(d);
    let o = run(
        d,
        &["tune", "--in", "sim.csv", "--method", "dp", "--gamma-grid", "2,6,1e9", "--out", "cv.csv", "--est-out", "cv.json"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = std::fs::read_to_string(d.join("cv.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "gamma,k_hat,test_loss");
    assert_eq!(lines.len(), 4);
    assert!(lines[3].starts_with("1000000000,0,"));
    let est = segmentation_from_json(&std::fs::read_to_string(d.join("cv.json")).unwrap()).unwrap();
    assert_eq!(est.t_max(), 160);
}

#[test]
fn fit_prints_ranking_with_labels() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("m.csv"),
        "t,winner,loser\n1,Lakers,Bulls\n2,Lakers,Heat\n3,Bulls,Heat\n4,Lakers,Bulls\n5,Heat,Bulls\n6,Lakers,Heat\n",
    )
    .unwrap();
    let o = run(d, &["fit", "--in", "m.csv", "--interval", "1:6"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "rank,item,theta");
    assert!(rows[1].starts_with("1,Lakers,"), "{text}");
    assert_eq!(rows.len(), 4);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("dup.csv"), "t,winner,loser\n1,a,b\n1,b,a\n").unwrap();
    assert_eq!(run(d, &["detect", "--in", "dup.csv", "--gamma", "1"]).status.code(), Some(2));
    assert_eq!(run(d, &["detect", "--in", "missing.csv", "--gamma", "1"]).status.code(), Some(2));
    assert_eq!(run(d, &["detect", "--in", "dup.csv"]).status.code(), Some(2));

    std::fs::write(d.join("ok.csv"), "t,winner,loser\n1,a,b\n2,c,d\n3,b,a\n").unwrap();
    std::fs::write(d.join("split.txt"), "a,b\nc,d\n").unwrap();
    let o = run(d, &["fit", "--in", "ok.csv", "--graph", "split.txt", "--interval", "1:3"]);
    assert_eq!(o.status.code(), Some(3));

    std::fs::write(d.join("off.csv"), "t,winner,loser\n1,a,c\n").unwrap();
    std::fs::write(d.join("path.txt"), "a b\nb c\n").unwrap();
    let o = run(d, &["fit", "--in", "off.csv", "--graph", "path.txt", "--interval", "1:1"]);
    assert_eq!(o.status.code(), Some(2));

    simulate(d);
    let o = run(d, &["fit", "--in", "sim.csv", "--interval", "1:160", "--mode", "constrained", "--max-iter", "1"]);
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
    let o = run(d, &["fit", "--in", "sim.csv", "--interval", "1:160", "--mode", "constrained"]);
    assert!(o.status.success());
}

#[test]
fn explicit_items_fix_the_order() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("m.csv"), "t,winner,loser\n1,b,a\n2,b,a\n").unwrap();
    let o = run(d, &["fit", "--in", "m.csv", "--items", "a,b,c", "--interval", "1:2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = run(d, &["fit", "--in", "m.csv", "--items", "a,c", "--interval", "1:2"]);
    assert_eq!(o.status.code(), Some(2));
}
