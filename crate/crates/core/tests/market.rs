use consumption_duality::market::{
    cumulative_from_rate, is_admissible_strategy, validate_scenario, wealth_process, AdmissibilityViolation,
    ConstraintCone, ConsumptionMeasure, EventTree, MarketScenario, NodeSpec, Strategy, ViolationKind,
};
use consumption_duality::scenarios::complete_binomial;

fn one_step() -> MarketScenario {
    complete_binomial(2.0, 0.5, 0.5, 1, 1.0).unwrap()
}

fn up_down(s: &MarketScenario) -> (usize, usize) {
    let c = s.tree().children(s.tree().root());
    (c[0], c[1])
}

#[test]
fn wealth_of_unit_holding() {
    let s = one_step();
    let mut strat = Strategy::idle(&s);
    strat.holdings[s.tree().root()] = vec![1.0];
    let w = wealth_process(&s, 1.0, &strat).unwrap();
    let (up, down) = up_down(&s);
    assert_eq!(w[up], 2.0);
    assert_eq!(w[down], 0.5);
}

#[test]
fn idle_strategy_is_admissible() {
    let s = one_step();
    let r = is_admissible_strategy(&s, 1.0, &Strategy::idle(&s)).unwrap();
    assert!(r.is_admissible());
    assert_eq!(r.min_terminal_wealth, 1.0);
}

#[test]
fn leveraged_holding_goes_bankrupt() {
    let s = one_step();
    let mut strat = Strategy::idle(&s);
    strat.holdings[s.tree().root()] = vec![3.0];
    let r = is_admissible_strategy(&s, 1.0, &strat).unwrap();
    let (_, down) = up_down(&s);
    assert_eq!(
        r.violation,
        Some(AdmissibilityViolation::NegativeTerminalWealth { node: down, wealth: -0.5 })
    );
}

#[test]
fn short_position_outside_cone() {
    let s = one_step().with_cone(ConstraintCone::nonnegative(1)).unwrap();
    let mut strat = Strategy::idle(&s);
    strat.holdings[s.tree().root()] = vec![-0.1];
    let r = is_admissible_strategy(&s, 1.0, &strat).unwrap();
    assert!(matches!(r.violation, Some(AdmissibilityViolation::NotInCone { .. })));
}

#[test]
fn cumulative_consumption_from_rate() {
    let s = one_step()
        .with_mu(ConsumptionMeasure::new(vec![0.5, 0.5]).unwrap())
        .unwrap();
    let c = cumulative_from_rate(&s, &[1.0, 1.0, 1.0]).unwrap();
    let (up, down) = up_down(&s);
    assert_eq!(c[s.tree().root()], 0.5);
    assert_eq!(c[up], 1.0);
    assert_eq!(c[down], 1.0);
}

#[test]
fn builder_output_validates() {
    assert!(validate_scenario(&one_step()).is_pass());
}

fn raw(probs: [f64; 2], endowment: Vec<f64>, mu: Vec<f64>, prices: Vec<Vec<f64>>) -> MarketScenario {
    let specs = [
        NodeSpec {
            parent: None,
            time_index: 0,
            cond_prob: 1.0,
        },
        NodeSpec {
            parent: Some(0),
            time_index: 1,
            cond_prob: probs[0],
        },
        NodeSpec {
            parent: Some(0),
            time_index: 1,
            cond_prob: probs[1],
        },
    ];
    let tree = EventTree::new(&specs, vec![0.0, 1.0]).unwrap();
    MarketScenario::new(
        tree,
        prices,
        endowment,
        ConsumptionMeasure::new(mu).unwrap(),
        ConstraintCone::unconstrained(1),
    )
    .unwrap()
}

fn prices() -> Vec<Vec<f64>> {
    vec![vec![1.0], vec![2.0], vec![0.5]]
}

#[test]
fn validation_reports_each_violation() {
    let bad_prob = raw([0.0, 1.0], vec![0.0; 3], vec![0.0, 1.0], prices());
    assert!(validate_scenario(&bad_prob).has(ViolationKind::NonPositiveProbability));

    let bad_sum = raw([0.5, 0.6], vec![0.0; 3], vec![0.0, 1.0], prices());
    assert!(validate_scenario(&bad_sum).has(ViolationKind::ProbabilitySum));

    let root_endowment = raw([0.5, 0.5], vec![1.0, 1.0, 1.0], vec![0.0, 1.0], prices());
    assert!(validate_scenario(&root_endowment).has(ViolationKind::EndowmentRootNonzero));

    let exhausted = raw([0.5, 0.5], vec![0.0; 3], vec![1.0, 0.0], prices());
    assert!(validate_scenario(&exhausted).has(ViolationKind::MuExhausted));

    let not_normalized = raw([0.5, 0.5], vec![0.0; 3], vec![0.0, 2.0], prices());
    assert!(validate_scenario(&not_normalized).has(ViolationKind::MuTotal));

    // both children above the root: arbitrage under any cone containing +1
    let arbitrage = raw([0.5, 0.5], vec![0.0; 3], vec![0.0, 1.0], vec![vec![1.0], vec![2.0], vec![1.5]]);
    let report = validate_scenario(&arbitrage);
    assert!(report.has(ViolationKind::NoArbitrage));
    assert_eq!(report.violations.len(), 1);
}

#[test]
fn short_only_cone_removes_arbitrage_of_rising_asset() {
    let s = raw([0.5, 0.5], vec![0.0; 3], vec![0.0, 1.0], vec![vec![1.0], vec![2.0], vec![1.5]])
        .with_cone(ConstraintCone::nonpositive(1))
        .unwrap();
    assert!(validate_scenario(&s).is_pass());
}
