use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name)
}

fn cduality(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cduality"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const BINOMIAL: &str = r#"
[tree]
time_grid = [0.0, 1.0]
nodes = [
    { id = 0, time_index = 0, cond_prob = 1.0 },
    { id = 1, parent = 0, time_index = 1, cond_prob = 0.5 },
    { id = 2, parent = 0, time_index = 1, cond_prob = 0.5 },
]

[prices]
values = [[1.0], [UP], [0.5]]

[mu]
weights = [0.0, 1.0]

[utility]
family = "log"
"#;

#[test]
fn solve_prints_certified_summary() {
    let f = fixture("complete_binomial_log.scn");
    let o = cduality(&["solve", "--scenario", f.to_str().unwrap(), "--x", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(
        lines.next().unwrap(),
        "x,y,primal_value,dual_value,gap,budget_slack,vi_worst,certified"
    );
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let value: f64 = row[2].parse().unwrap();
    let exact = 0.5 * 1.5f64.ln() + 0.5 * 0.75f64.ln();
    assert!((value - exact).abs() < 1e-10);
    assert_eq!(row[7], "true");
}

#[test]
fn solve_writes_outputs_for_every_fixture() {
    for name in [
        "complete_binomial_log.scn",
        "lakner_slud_log.scn",
        "mixed_two_asset.scn",
        "no_short_sale_power.scn",
    ] {
        let dir = tempfile::tempdir().unwrap();
        let f = fixture(name);
        let o = cduality(&[
            "solve",
            "--scenario",
            f.to_str().unwrap(),
            "--x",
            "0.5,2",
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{name}: {}", stderr(&o));
        for file in ["summary.csv", "paths_000.csv", "paths_001.csv", "results.json"] {
            assert!(dir.path().join(file).exists(), "{name}: missing {file}");
        }
    }
}

#[test]
fn builder_with_seed_runs() {
    let o = cduality(&["solve", "--builder", "random", "--seed", "5", "--utility", "log", "--x", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn sequential_flag_gives_identical_output() {
    let f = fixture("mixed_two_asset.scn");
    let args = ["solve", "--scenario", f.to_str().unwrap(), "--x", "0.5,1,2", "--y-grid", "0.7"];
    let a = cduality(&args);
    let mut seq = args.to_vec();
    seq.push("--sequential");
    let b = cduality(&seq);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn sweep_reports_shape() {
    let f = fixture("complete_binomial_log.scn");
    let o = cduality(&[
        "sweep",
        "--scenario",
        f.to_str().unwrap(),
        "--x",
        "0.5,1,2",
        "--y-grid",
        "0.5,1,2",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("u_increasing=true u_concave=true v_decreasing=true v_convex=true"));
}

#[test]
fn sweep_with_two_points_is_an_input_error() {
    let f = fixture("complete_binomial_log.scn");
    let o = cduality(&["sweep", "--scenario", f.to_str().unwrap(), "--x", "0.5,1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn check_accepts_the_optimal_plan_and_rejects_an_expensive_one() {
    let dir = tempfile::tempdir().unwrap();
    let f = fixture("complete_binomial_log.scn");
    let good = dir.path().join("good.csv");
    fs::write(&good, "node,rate\n1,1.5\n2,0.75\n").unwrap();
    let o = cduality(&["check", "--scenario", f.to_str().unwrap(), "--plan", good.to_str().unwrap(), "--x", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("\"financeable\": true"));

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "node,rate\n1,3.0\n2,3.0\n").unwrap();
    let o = cduality(&["check", "--scenario", f.to_str().unwrap(), "--plan", bad.to_str().unwrap(), "--x", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("\"financeable\": false"));
}

#[test]
fn oracle_agrees_with_solver() {
    let f = fixture("no_short_sale_power.scn");
    let o = cduality(&["oracle", "--scenario", f.to_str().unwrap(), "--x", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let row: Vec<f64> = out.lines().nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert!(row[2] <= 1e-6);
}

#[test]
fn elasticity_of_power_utility() {
    let o = cduality(&["elasticity", "--builder", "complete_binomial", "--utility", "power:0.5", "--gamma", "0.75"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((report["estimate"].as_f64().unwrap() - 0.5).abs() < 1e-3);
}

#[test]
fn bad_probability_exits_with_field_path() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.scn");
    fs::write(
        &path,
        BINOMIAL
            .replace("UP", "2.0")
            .replace("time_index = 1, cond_prob = 0.5 },\n    { id = 2", "time_index = 1, cond_prob = -0.5 },\n    { id = 2"),
    )
    .unwrap();
    let o = cduality(&["solve", "--scenario", path.to_str().unwrap(), "--x", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("tree.nodes[1].cond_prob"), "{}", stderr(&o));
}

#[test]
fn arbitrage_exits_with_code_three() {
    let dir = tempfile::tempdir().unwrap();
    // both states move the price up
    let path = dir.path().join("arb.scn");
    fs::write(&path, BINOMIAL.replace("UP", "2.0").replace("[0.5]]", "[1.5]]")).unwrap();
    let o = cduality(&["solve", "--scenario", path.to_str().unwrap(), "--x", "1"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn unknown_family_and_nonpositive_wealth_are_input_errors() {
    let f = fixture("complete_binomial_log.scn");
    let o = cduality(&["solve", "--scenario", f.to_str().unwrap(), "--utility", "family = \"cara\"", "--x", "1"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("cara"), "{}", stderr(&o));
    let o = cduality(&["solve", "--scenario", f.to_str().unwrap(), "--x=-1"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("x must be positive"), "{}", stderr(&o));
}

#[test]
fn missing_source_is_rejected_by_the_parser() {
    let o = cduality(&["solve", "--x", "1"]);
    assert!(!o.status.success());
}
