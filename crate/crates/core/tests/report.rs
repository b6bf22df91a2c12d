use std::fs;
use std::path::{Path, PathBuf};

use consumption_duality::exec::Exec;
use consumption_duality::report::{
    check_plan, exit_code, load_scenario, parse_plan, parse_scenario, parse_utility_str, run, solve_grid,
    summary_csv, sweep, RunConfig, RunResult, ScenarioSource,
};
use consumption_duality::solver::SolverOptions;
use consumption_duality::utility::UtilitySpec;
use consumption_duality::Error;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn fixture(name: &str) -> PathBuf {
    fixtures().join(name)
}

fn all_fixtures() -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(fixtures())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "scn"))
        .collect();
    v.sort();
    v
}

fn fixture_text() -> String {
    fs::read_to_string(fixture("complete_binomial_log.scn")).unwrap()
}

#[test]
fn shipped_fixture_loads() {
    let l = load_scenario(&fixture("complete_binomial_log.scn")).unwrap();
    assert_eq!(l.scenario.tree().num_nodes(), 3);
    assert_eq!(l.utility, UtilitySpec::log());
    assert_eq!(all_fixtures().len(), 4);
    for f in all_fixtures() {
        load_scenario(&f).unwrap_or_else(|e| panic!("{}: {e}", f.display()));
    }
}

#[test]
fn negative_probability_names_the_field() {
    let text = fixture_text().replace("parent = 0, time_index = 1, cond_prob = 0.5 },\n    { id = 2", "parent = 0, time_index = 1, cond_prob = -0.5 },\n    { id = 2");
    let err = parse_scenario(&text, "neg.scn").unwrap_err();
    match &err {
        Error::Parse { path, .. } => assert_eq!(path, "tree.nodes[1].cond_prob"),
        other => panic!("unexpected {other:?}"),
    }
    assert_eq!(exit_code(&err), 2);
}

#[test]
fn unknown_family_is_reported() {
    let text = fixture_text().replace("family = \"log\"", "family = \"cara\"");
    let err = parse_scenario(&text, "x.scn").unwrap_err();
    assert!(err.to_string().contains("unknown utility family"));
    assert!(parse_utility_str("exponential:2").unwrap_err().to_string().contains("unknown utility family"));
}

#[test]
fn syntax_error_carries_location() {
    let err = parse_scenario("[tree\ntime_grid = [0.0]", "broken.scn").unwrap_err();
    let msg = err.to_string();
    assert!(msg.starts_with("broken.scn"), "{msg}");
    assert!(msg.contains("line 1"), "{msg}");
}

#[test]
fn missing_field_path() {
    let text = fixture_text().replace("{ id = 2, parent = 0, time_index = 1, cond_prob = 0.5 }", "{ id = 2, parent = 0, cond_prob = 0.5 }");
    match parse_scenario(&text, "x.scn").unwrap_err() {
        Error::Parse { path, .. } => assert_eq!(path, "tree.nodes[2].time_index"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn inline_utility_strings() {
    assert_eq!(parse_utility_str("log").unwrap(), UtilitySpec::log());
    assert_eq!(parse_utility_str("power:0.5").unwrap(), UtilitySpec::power(0.5));
    let u = parse_utility_str("{ family = \"scaled\", outer = 2.0, inner = 0.5, base = { family = \"log\" } }").unwrap();
    assert_eq!(u, UtilitySpec::scaled(UtilitySpec::log(), 2.0, 0.5));
    assert!(parse_utility_str("power:1.5").is_err());
}

fn config(path: PathBuf, xs: &[f64]) -> RunConfig {
    let mut c = RunConfig::new(ScenarioSource::File(path));
    c.x_grid = xs.to_vec();
    c
}

#[test]
fn run_three_wealths() {
    let (_, results) = run(&config(fixture("complete_binomial_log.scn"), &[0.5, 1.0, 2.0])).unwrap();
    assert_eq!(results.len(), 3);
    for r in &results {
        assert!(r.solution.relative_gap() <= 1e-6);
        assert!(r.solution.certificates.all_pass());
    }
    let csv = summary_csv(&results);
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.starts_with("x,y,primal_value,dual_value,gap,budget_slack,vi_worst,certified\n"));
}

#[test]
fn constant_rate_column_is_constant() {
    let mut c = RunConfig::new(ScenarioSource::Builder("lakner_slud:e=1.5,n=2".into()));
    c.utility = Some(UtilitySpec::log());
    c.x_grid = vec![1e-12];
    let (l, results) = run(&c).unwrap();
    let s = &results[0].solution;
    for n in l.scenario.charged_nodes() {
        assert!((s.c_hat[n] - 1.5).abs() < 1e-8);
    }
}

#[test]
fn arbitrage_maps_to_its_exit_code() {
    let text = fixture_text().replace("[[1.0], [2.0], [0.5]]", "[[1.0], [2.0], [1.5]]");
    let err = parse_scenario(&text, "arb.scn").unwrap_err();
    assert!(matches!(err, Error::NoArbitrage));
    assert_eq!(exit_code(&err), 3);
}

#[test]
fn config_preconditions() {
    assert!(run(&config(fixture("complete_binomial_log.scn"), &[0.0])).is_err());
    assert!(run(&config(fixture("complete_binomial_log.scn"), &[])).is_err());
    let mut c = config(fixture("complete_binomial_log.scn"), &[1.0]);
    c.options.tol_opt = 0.0;
    assert!(run(&c).is_err());
}

#[test]
fn outputs_are_deterministic() {
    for f in all_fixtures() {
        let dirs: Vec<_> = (0..2).map(|_| tempfile::tempdir().unwrap()).collect();
        for (i, d) in dirs.iter().enumerate() {
            let mut c = config(f.clone(), &[0.5, 1.0, 2.0]);
            c.y_grid = vec![0.8];
            c.out_dir = Some(d.path().to_path_buf());
            c.exec = if i == 0 { Exec::Parallel } else { Exec::Sequential };
            run(&c).unwrap();
        }
        let mut names: Vec<_> = fs::read_dir(dirs[0].path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        assert!(names.len() >= 6);
        for name in names {
            let a = fs::read(dirs[0].path().join(&name)).unwrap();
            let b = fs::read(dirs[1].path().join(&name)).unwrap();
            assert_eq!(a, b, "{} {:?}", f.display(), name);
        }
    }
}

#[test]
fn json_round_trip_is_lossless() {
    let l = load_scenario(&fixture("no_short_sale_power.scn")).unwrap();
    let results = solve_grid(&l, &[0.7], &[], &SolverOptions::default(), Exec::Sequential).unwrap();
    let text = serde_json::to_string(&results).unwrap();
    let back: Vec<RunResult> = serde_json::from_str(&text).unwrap();
    assert_eq!(back, results);
    assert!(text.contains("\"format\""));
}

#[test]
fn log_sweep_has_unit_elasticity_of_value() {
    let l = load_scenario(&fixture("complete_binomial_log.scn")).unwrap();
    let xs = [0.5, 1.0, 2.0, 4.0];
    let r = sweep(&l, &xs, &[0.25, 1.0, 4.0], &SolverOptions::default(), Exec::default()).unwrap();
    let u1 = r.x_rows[1].value;
    for row in &r.x_rows {
        assert!((row.derivative_fd * row.x - 1.0).abs() <= 1e-6);
        assert!((row.value - (u1 + row.x.ln())).abs() <= 1e-9);
    }
    for row in &r.y_rows {
        assert!((row.derivative - row.derivative_fd).abs() <= 1e-4 * row.derivative.abs());
    }
}

#[test]
fn sweep_shape_flags_on_fixtures() {
    for f in all_fixtures() {
        let l = load_scenario(&f).unwrap();
        let r = sweep(&l, &[0.25, 0.5, 1.0, 2.0, 4.0], &[0.25, 0.5, 1.0, 2.0, 4.0], &SolverOptions::default(), Exec::default())
            .unwrap();
        assert!(r.shape_ok(), "{}", f.display());
        let endowed = l.scenario.endowment().iter().any(|e| *e != 0.0);
        if !endowed {
            assert!(r.v_decreasing, "{}", f.display());
        }
    }
}

#[test]
fn sweep_needs_three_points() {
    let l = load_scenario(&fixture("complete_binomial_log.scn")).unwrap();
    let err = sweep(&l, &[1.0, 2.0], &[], &SolverOptions::default(), Exec::default()).unwrap_err();
    assert!(matches!(err, Error::InvalidArgument(_)));
}

#[test]
fn plan_checks() {
    let l = load_scenario(&fixture("complete_binomial_log.scn")).unwrap();
    let (up, down) = (l.scenario.tree().children(0)[0], l.scenario.tree().children(0)[1]);
    let good = parse_plan(&format!("node,rate\n{up},1.5\n{down},0.75\n"), 3, "plan").unwrap();
    let c = check_plan(&l, 1.0, &good).unwrap();
    assert!(c.financeable);
    assert!((c.primal_value - 0.058891517828191).abs() < 1e-12);
    assert!(c.min_terminal_wealth.unwrap().abs() < 1e-9);
    let bad = parse_plan(&format!("node,rate\n{up},1.6\n{down},0.75\n"), 3, "plan").unwrap();
    let c = check_plan(&l, 1.0, &bad).unwrap();
    assert!(!c.financeable && c.budget_slack > 0.03);
    assert!(parse_plan("node,rate\n7,1.0\n", 3, "plan").is_err());
    assert!(parse_plan("id,value\n", 3, "plan").is_err());
}
