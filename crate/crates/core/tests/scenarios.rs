use consumption_duality::dual_domain::supermartingale_constraints;
use consumption_duality::market::validate_scenario;
use consumption_duality::scenarios::{
    complete_binomial, lakner_slud, lakner_slud_constant, mixed_consumption_terminal, no_short_sale, random_scenario,
    RandomShape, ScenarioSpec, BUILDER_TAGS,
};
use consumption_duality::solver::{solve, SolverOptions};
use consumption_duality::utility::{UtilityField, UtilitySpec};
use consumption_duality::Error;

#[test]
fn complete_binomial_requires_straddling_factors() {
    assert!(matches!(complete_binomial(1.2, 1.05, 0.5, 1, 1.0), Err(Error::NoArbitrage)));
    let s = complete_binomial(2.0, 0.5, 0.5, 3, 1.0).unwrap();
    assert_eq!(s.tree().num_paths(), 8);
    assert!(validate_scenario(&s).is_pass());
}

#[test]
fn zero_rates_are_rejected() {
    assert!(lakner_slud_constant(0.0, 0.5, 2).is_err());
}

#[test]
fn constant_rate_consumes_the_endowment() {
    let e = 0.7;
    let s = lakner_slud_constant(e, 0.5, 3).unwrap();
    let f = UtilityField::resolve(&UtilitySpec::log(), s.tree()).unwrap();
    let sol = solve(&s, &f, 0.0, &SolverOptions::default()).unwrap();
    for n in s.charged_nodes() {
        assert!((sol.c_hat[n] - e).abs() <= 1e-10, "node {n}: {}", sol.c_hat[n]);
    }
    assert!(sol.certificates.all_pass());
}

#[test]
fn varying_rates_satisfy_budget_identity() {
    let s0 = lakner_slud_constant(1.0, 0.5, 2).unwrap();
    let rates: Vec<f64> = (0..s0.tree().num_nodes()).map(|n| 0.5 + 0.37 * ((n * 5 % 7) as f64)).collect();
    let s = lakner_slud(&rates, 0.4, 2).unwrap();
    let f = UtilityField::resolve(&UtilitySpec::log(), s.tree()).unwrap();
    let sol = solve(&s, &f, 0.0, &SolverOptions::default()).unwrap();
    let t = s.tree();
    let (mut lhs, mut rhs) = (0.0, 0.0);
    for n in s.charged_nodes() {
        let w = s.mu_weight(n) * t.prob(n) * sol.density[n];
        lhs += w * sol.c_hat[n];
        rhs += w * rates[n];
    }
    assert!((lhs - rhs).abs() <= 1e-7, "{lhs} vs {rhs}");
}

#[test]
fn two_state_endowment_gives_interior_optimizer() {
    let s = lakner_slud(&[0.0, 2.0, 1.0], 0.5, 1).unwrap();
    let f = UtilityField::resolve(&UtilitySpec::log(), s.tree()).unwrap();
    let sol = solve(&s, &f, 0.0, &SolverOptions::default()).unwrap();
    assert!(sol.q_hat.q.iter().all(|q| *q > 1e-3 && *q < 1.0 - 1e-3));
}

#[test]
fn no_short_sale_row_counts() {
    let s = no_short_sale(2.0, 0.5, 0.5, 1).unwrap();
    assert_eq!(supermartingale_constraints(&s).inequality_rows().len(), 1);
}

#[test]
fn mixed_power_pairs() {
    let base = complete_binomial(2.0, 0.5, 0.5, 2, 1.0).unwrap();
    let m = mixed_consumption_terminal(UtilitySpec::power(0.4), UtilitySpec::power(0.4), &base).unwrap();
    assert!((m.embedded.mu().total() - 1.0).abs() < 1e-15);
    assert!(validate_scenario(&m.embedded).is_pass());
    assert!(mixed_consumption_terminal(UtilitySpec::power(0.3), UtilitySpec::power(0.6), &base).is_err());
}

#[test]
fn random_instances_are_reproducible_and_valid() {
    for seed in 0..30 {
        let a = random_scenario(seed, RandomShape::default()).unwrap();
        let b = random_scenario(seed, RandomShape::default()).unwrap();
        assert_eq!(a.scenario.prices(), b.scenario.prices());
        assert_eq!(a.scenario.endowment(), b.scenario.endowment());
        assert_eq!(a.utility, b.utility);
        assert!(validate_scenario(&a.scenario).is_pass(), "seed {seed}");
        assert!(a.scenario.tree().horizon() <= 3);
        assert!(a.scenario.tree().nodes().iter().all(|n| n.children.len() <= 3));
    }
    let small = RandomShape {
        max_charged: 8,
        ..RandomShape::default()
    };
    for seed in 0..10 {
        assert!(random_scenario(seed, small).unwrap().scenario.charged_nodes().len() <= 8);
    }
}

#[test]
fn spec_strings() {
    for tag in BUILDER_TAGS {
        assert!(ScenarioSpec::parse(tag).unwrap().build().is_ok(), "{tag}");
    }
    let built = ScenarioSpec::parse("lakner_slud:rates=0;1;2,n=1").unwrap().build().unwrap();
    assert_eq!(built.scenario.tree().num_nodes(), 3);
    assert!(matches!(ScenarioSpec::parse("trinomial"), Err(Error::UnknownBuilder(_))));
    assert!(matches!(ScenarioSpec::parse("complete_binomial:u=x").unwrap().build(), Err(Error::Parse { .. })));
    let m = ScenarioSpec::parse("mixed:alpha1=0.5,alpha2=0.5").unwrap().build().unwrap();
    assert!(m.utility.is_some());
}
