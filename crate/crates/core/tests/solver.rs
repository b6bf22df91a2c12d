use consumption_duality::dual_domain::{supermartingale_constraints, DualMeasure};
use consumption_duality::exec::Exec;
use consumption_duality::market::{ConsumptionMeasure, MarketScenario};
use consumption_duality::scenarios::{
    complete_binomial, lakner_slud, lakner_slud_constant, mixed_consumption_terminal, no_short_sale,
};
use consumption_duality::solver::{
    brute_force_primal, budget_check, dual_value, match_y_to_x, minimax_check, recover_portfolio, solve, solve_dual,
    variational_inequality_check, DualProblem, InitialPoint, SolverOptions,
};
use consumption_duality::utility::{UtilityField, UtilitySpec};
use consumption_duality::Error;

fn log_field(s: &MarketScenario) -> UtilityField {
    UtilityField::resolve(&UtilitySpec::log(), s.tree()).unwrap()
}

fn binomial() -> MarketScenario {
    complete_binomial(2.0, 0.5, 0.5, 1, 1.0).unwrap()
}

/// Up-path index of a one-period tree.
fn up_path(s: &MarketScenario) -> usize {
    s.tree().paths_below(s.tree().children(0)[0]).start
}

/// Lakner–Slud one-period tree with terminal consumption only and
/// terminal endowment (2, 1).
fn two_state_endowment() -> MarketScenario {
    let s = lakner_slud(&[1.0, 1.0, 1.0], 0.5, 1).unwrap();
    let s = s.with_mu(ConsumptionMeasure::point_mass(2, 1)).unwrap();
    let (a, b) = (s.tree().children(0)[0], s.tree().children(0)[1]);
    let mut e = vec![0.0; 3];
    e[a] = 2.0;
    e[b] = 1.0;
    s.with_endowment(e).unwrap()
}

/// Minimizes a convex function on [lo, hi] by ternary search.
fn ternary(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let (a, b) = (lo + (hi - lo) / 3.0, hi - (hi - lo) / 3.0);
        if f(a) < f(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    0.5 * (lo + hi)
}

fn v_log(z: f64) -> f64 {
    -z.ln() - 1.0
}

#[test]
fn dual_objective_closed_forms() {
    let s = lakner_slud_constant(1.7, 0.5, 2).unwrap();
    let f = log_field(&s);
    let j = dual_value(&s, &f, 1.0, &DualMeasure::reference(s.tree())).unwrap();
    assert!((j.value - 0.7).abs() < 1e-12);

    let s = binomial();
    let f = log_field(&s);
    let mut q = vec![2.0 / 3.0; 2];
    q[up_path(&s)] = 1.0 / 3.0;
    let j = dual_value(&s, &f, 1.0, &DualMeasure::new(q.clone())).unwrap();
    let expected = 0.5 * v_log(2.0 / 3.0) + 0.5 * v_log(4.0 / 3.0);
    assert!((j.value - expected).abs() < 1e-14);
    let again = dual_value(&s, &f, 1.0, &DualMeasure::new(q)).unwrap();
    assert_eq!(j.value, again.value);
}

#[test]
fn dual_optimizer_against_one_dimensional_search() {
    let s = two_state_endowment();
    let f = log_field(&s);
    let sol = solve_dual(&s, &f, 1.0, &SolverOptions::default()).unwrap();
    let up = up_path(&s);
    let (ea, eb) = (2.0, 1.0);
    let j = |q: f64| 0.5 * v_log(2.0 * q) + 0.5 * v_log(2.0 * (1.0 - q)) + ea * q + eb * (1.0 - q);
    let q_star = ternary(j, 1e-9, 1.0 - 1e-9);
    assert!((sol.q.q[up] - q_star).abs() < 1e-6);
    assert!(sol.q.q[up] > 0.0 && sol.q.q[up] < 0.5);
}

#[test]
fn no_short_sale_optimizer_on_boundary() {
    let s = no_short_sale(2.0, 0.5, 0.5, 1).unwrap();
    let f = log_field(&s);
    let sol = solve_dual(&s, &f, 1.0, &SolverOptions::default()).unwrap();
    assert!((sol.q.q[up_path(&s)] - 1.0 / 3.0).abs() < 1e-9);

    let x = solve(&s, &f, 1.0, &SolverOptions::default()).unwrap();
    let (up, down) = (s.tree().children(0)[0], s.tree().children(0)[1]);
    assert!((x.c_hat[up] - 1.5).abs() < 1e-8);
    assert!((x.c_hat[down] - 0.75).abs() < 1e-8);
    assert!(x.certificates.all_pass());
    let vi = variational_inequality_check(&s, &f, x.y, &x.q_hat).unwrap();
    assert!(vi.worst <= 1e-12);
}

#[test]
fn dual_derivative_closed_forms() {
    let s = binomial();
    let f = log_field(&s);
    let p = DualProblem::new(&s, &f).unwrap();
    for y in [0.5, 1.0, 3.0] {
        let sol = p.solve_dual(y, &SolverOptions::default()).unwrap();
        assert!((p.derivative(y, &sol.q).unwrap() + 1.0 / y).abs() < 1e-12);
    }
    let e = 1.3;
    let s = lakner_slud_constant(e, 0.5, 2).unwrap();
    let f = log_field(&s);
    let p = DualProblem::new(&s, &f).unwrap();
    for y in [0.5, 1.0, 3.0] {
        let sol = p.solve_dual(y, &SolverOptions::default()).unwrap();
        assert!((p.derivative(y, &sol.q).unwrap() - (e - 1.0 / y)).abs() < 1e-9);
    }
}

#[test]
fn dual_derivative_at_large_scale_within_endowment_range() {
    let s = two_state_endowment();
    let f = log_field(&s);
    let p = DualProblem::new(&s, &f).unwrap();
    let y = 1e6;
    let sol = p.solve_dual(y, &SolverOptions::default()).unwrap();
    let d = p.derivative(y, &sol.q).unwrap();
    let poly = supermartingale_constraints(&s);
    let e = s.terminal_endowments();
    let lo = poly.minimize_linear(&e).unwrap().0;
    let hi = poly.maximize_linear(&e).unwrap().0;
    assert!(d >= lo - 1e-6 && d <= hi + 1e-6, "{d} not in [{lo}, {hi}]");
}

#[test]
fn matching_closed_forms() {
    let s = binomial();
    let f = log_field(&s);
    let opts = SolverOptions::default();
    assert!((match_y_to_x(&s, &f, 1.0, &opts).unwrap().y - 1.0).abs() < 1e-10);
    assert!((match_y_to_x(&s, &f, 2.0, &opts).unwrap().y - 0.5).abs() < 1e-10);

    let e = 0.8;
    let s = lakner_slud_constant(e, 0.5, 2).unwrap();
    let f = log_field(&s);
    for x in [0.0, 0.5, 3.0] {
        let m = match_y_to_x(&s, &f, x, &opts).unwrap();
        assert!((m.y - 1.0 / (x + e)).abs() < 1e-9 * m.y, "x={x}");
    }
}

#[test]
fn negative_wealth_is_rejected() {
    let s = binomial();
    let f = log_field(&s);
    assert!(match_y_to_x(&s, &f, -1.0, &SolverOptions::default()).is_err());
    // no endowment, so zero wealth admits no plan with finite log utility
    assert!(match_y_to_x(&s, &f, 0.0, &SolverOptions::default()).is_err());
}

#[test]
fn closed_form_solution() {
    let s = binomial();
    let f = log_field(&s);
    let sol = solve(&s, &f, 1.0, &SolverOptions::default()).unwrap();
    let (up, down) = (s.tree().children(0)[0], s.tree().children(0)[1]);
    assert!((sol.y - 1.0).abs() < 1e-8);
    assert!((sol.c_hat[up] - 1.5).abs() < 1e-8);
    assert!((sol.c_hat[down] - 0.75).abs() < 1e-8);
    assert!((sol.h_hat[0][0] - 0.5).abs() < 1e-8);
    assert!((sol.primal_value - (0.5 * 1.5f64.ln() + 0.5 * 0.75f64.ln())).abs() < 1e-8);
    assert!(sol.gap.abs() <= 1e-9);
    assert!(sol.certificates.all_pass());
}

#[test]
fn constant_plan_budget_and_portfolio() {
    let s = no_short_sale(1.5, 0.8, 0.5, 2).unwrap();
    let x = 1.3;
    let cumulative: Vec<f64> = (0..s.tree().num_nodes())
        .map(|n| if s.tree().is_terminal(n) { x } else { 0.0 })
        .collect();
    let b = budget_check(&s, &cumulative, x).unwrap();
    assert!(b.max_slack.abs() < 1e-12);
    for v in supermartingale_constraints(&s).vertices().unwrap().iter() {
        assert!((v.expect(&s.terminal_endowments()) - 0.0).abs() < 1e-12);
    }
    let p = recover_portfolio(&s, &cumulative, x).unwrap();
    for n in s.tree().interior_nodes() {
        assert!(p.holdings[n][0].abs() < 1e-9);
    }
}

#[test]
fn shortfall_is_not_financeable() {
    let s = binomial();
    let (up, down) = (s.tree().children(0)[0], s.tree().children(0)[1]);
    let mut c = vec![0.0; 3];
    c[up] = 1.6;
    c[down] = 0.75;
    assert!(budget_check(&s, &c, 1.0).unwrap().max_slack > 1e-3);
    assert!(matches!(recover_portfolio(&s, &c, 1.0), Err(Error::NotFinanceable { .. })));
}

#[test]
fn lakner_slud_admissibility_is_pathwise() {
    let s = lakner_slud_constant(1.0, 0.5, 1).unwrap();
    let t = s.tree();
    let e = s.endowment().to_vec();
    // consume exactly the endowment: financeable with no wealth
    let p = recover_portfolio(&s, &e, 0.0).unwrap();
    assert!(t.terminals().iter().all(|&n| p.wealth[n] >= -1e-12));
    let mut over = e.clone();
    over[t.terminal(0)] += 0.1;
    assert!(recover_portfolio(&s, &over, 0.0).is_err());
    assert!(recover_portfolio(&s, &over, 0.1).is_ok());
}

#[test]
fn minimax_on_singleton_and_two_node_domain() {
    let s = binomial();
    let f = log_field(&s);
    let r = minimax_check(&s, &f, 1.0, 4.0, 1e-2, Exec::default()).unwrap();
    assert!(r.discrepancy() < 5e-3);

    let s = two_state_endowment();
    let f = log_field(&s);
    let r = minimax_check(&s, &f, 1.0, 4.0, 1e-3, Exec::default()).unwrap();
    assert!(r.discrepancy() < 5e-3, "{r:?}");
}

#[test]
fn oracle_matches_closed_form() {
    let s = binomial();
    let f = log_field(&s);
    let r = brute_force_primal(&s, &f, 1.0, 3).unwrap();
    assert!((r.value - 0.058891517828191).abs() < 1e-5);
}

#[test]
fn oracle_agrees_with_solver_under_constraints() {
    let s = no_short_sale(1.5, 0.8, 0.4, 2).unwrap();
    let f = UtilityField::resolve(&UtilitySpec::power(0.5), s.tree()).unwrap();
    let sol = solve(&s, &f, 1.0, &SolverOptions::default()).unwrap();
    let r = brute_force_primal(&s, &f, 1.0, 6).unwrap();
    assert!((sol.primal_value - r.value).abs() <= 1e-4 * sol.primal_value.abs().max(1.0));
    assert!(r.value <= sol.primal_value + 1e-9);
}

#[test]
fn embedding_preserves_value_and_consumption() {
    let base = complete_binomial(1.4, 0.7, 0.5, 2, 1.0).unwrap();
    let m = mixed_consumption_terminal(UtilitySpec::power(0.5), UtilitySpec::power(0.5), &base).unwrap();
    let fd = UtilityField::resolve(&m.direct_utility, m.direct.tree()).unwrap();
    let fe = UtilityField::resolve(&m.embedded_utility, m.embedded.tree()).unwrap();
    let opts = SolverOptions::default();
    let direct = solve(&m.direct, &fd, 1.0, &opts).unwrap();
    let embedded = solve(&m.embedded, &fe, 1.0, &opts).unwrap();
    assert!((direct.primal_value - embedded.primal_value).abs() <= 1e-8);
    let mapped = m.to_direct(&embedded.c_hat);
    for n in m.direct.charged_nodes() {
        assert!((mapped[n] - direct.c_hat[n]).abs() <= 1e-7, "node {n}");
    }
}

#[test]
fn value_function_concave_in_wealth() {
    let s = no_short_sale(1.5, 0.8, 0.4, 2).unwrap();
    let f = log_field(&s);
    let opts = SolverOptions::default();
    let xs = [0.5, 1.0, 2.0, 4.0];
    let u: Vec<f64> = xs.iter().map(|&x| solve(&s, &f, x, &opts).unwrap().primal_value).collect();
    let slopes: Vec<f64> = (0..3).map(|i| (u[i + 1] - u[i]) / (xs[i + 1] - xs[i])).collect();
    assert!(slopes.windows(2).all(|w| w[1] < w[0]));
    assert!(slopes.iter().all(|d| *d > 0.0));
}

#[test]
fn solution_independent_of_start() {
    let s = no_short_sale(1.5, 0.8, 0.4, 2).unwrap();
    let f = UtilityField::resolve(&UtilitySpec::power(0.3), s.tree()).unwrap();
    let n = s.tree().num_paths();
    let starts = [
        InitialPoint::Default,
        InitialPoint::Reference,
        InitialPoint::Interior,
        InitialPoint::Measure(vec![1.0 / n as f64; n]),
    ];
    let sols: Vec<_> = starts
        .into_iter()
        .map(|initial| {
            let opts = SolverOptions {
                initial,
                ..SolverOptions::default()
            };
            solve_dual(&s, &f, 0.7, &opts).unwrap()
        })
        .collect();
    for s in &sols[1..] {
        assert!((s.value - sols[0].value).abs() < 1e-10);
        for (a, b) in s.q.q.iter().zip(&sols[0].q.q) {
            assert!((a - b).abs() < 1e-6);
        }
    }
}

#[test]
fn arbitrage_is_reported() {
    let s = binomial();
    let f = log_field(&s);
    let rising = MarketScenario::new(
        s.tree().clone(),
        vec![vec![1.0], vec![2.0], vec![1.5]],
        vec![0.0; 3],
        s.mu().clone(),
        s.cone().clone(),
    )
    .unwrap();
    assert!(matches!(solve(&rising, &f, 1.0, &SolverOptions::default()), Err(Error::NoArbitrage)));
}
