use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::market::{ConstraintCone, ConsumptionMeasure, EventTree, MarketScenario, NodeSpec};
use crate::utility::{Discount, UtilitySpec};

/// Shape limits for randomized scenarios.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomShape {
    pub max_periods: usize,
    pub max_branches: usize,
    /// largest number of nodes charged by μ
    pub max_charged: usize,
}

impl Default for RandomShape {
    fn default() -> Self {
        Self {
            max_periods: 3,
            max_branches: 3,
            max_charged: usize::MAX,
        }
    }
}

/// A randomized scenario with a matching utility and initial wealth.
#[derive(Debug, Clone)]
pub struct RandomInstance {
    pub scenario: MarketScenario,
    pub utility: UtilitySpec,
    pub x: f64,
    pub cone_kind: &'static str,
}

/// Seeded random market: a tree with 1..=max_periods periods and 2..=max
/// branches per node, one asset whose one-step factors straddle 1 (so
/// every cone below admits a full-support supermartingale measure), a
/// cone drawn from {ℝ, ℝ₊, −ℝ₊}, a bounded nondecreasing endowment, a
/// consumption measure with mass at the horizon and a power, log or
/// discounted utility.
pub fn random_scenario(seed: u64, shape: RandomShape) -> Result<RandomInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let inst = draw(&mut rng, shape)?;
        if inst.scenario.charged_nodes().len() <= shape.max_charged {
            return Ok(inst);
        }
    }
}

fn draw(rng: &mut ChaCha8Rng, shape: RandomShape) -> Result<RandomInstance> {
    let periods = rng.gen_range(1..=shape.max_periods.max(1));
    let mut specs = vec![NodeSpec {
        parent: None,
        time_index: 0,
        cond_prob: 1.0,
    }];
    let mut factors = vec![1.0];
    let mut frontier = vec![0usize];
    for t in 1..=periods {
        let mut next = Vec::new();
        for &par in &frontier {
            let b = rng.gen_range(2..=shape.max_branches.max(2));
            let raw: Vec<f64> = (0..b).map(|_| rng.gen_range(0.2..1.0)).collect();
            let total: f64 = raw.iter().sum();
            // factors: one below 1, one above 1, the rest anywhere
            let mut f: Vec<f64> = (0..b).map(|_| rng.gen_range(0.75..1.35)).collect();
            f[0] = rng.gen_range(0.7..0.95);
            f[1] = rng.gen_range(1.05..1.4);
            f.shuffle(rng);
            for i in 0..b {
                next.push(specs.len());
                specs.push(NodeSpec {
                    parent: Some(par),
                    time_index: t,
                    cond_prob: raw[i] / total,
                });
                factors.push(f[i]);
            }
        }
        frontier = next;
    }
    let grid: Vec<f64> = (0..=periods).map(|i| i as f64).collect();
    let tree = EventTree::new(&specs, grid)?;
    let mut prices = vec![vec![1.0]; tree.num_nodes()];
    for id in tree.forward_order() {
        if let Some(p) = tree.parent(id) {
            prices[id] = vec![prices[p][0] * factors[id]];
        }
    }
    let (cone, cone_kind) = match rng.gen_range(0..3) {
        0 => (ConstraintCone::unconstrained(1), "unconstrained"),
        1 => (ConstraintCone::nonnegative(1), "nonnegative"),
        _ => (ConstraintCone::nonpositive(1), "nonpositive"),
    };
    let mut endowment = vec![0.0; tree.num_nodes()];
    if rng.gen_bool(0.6) {
        for id in tree.forward_order() {
            if let Some(p) = tree.parent(id) {
                endowment[id] = endowment[p] + rng.gen_range(0.0..0.5);
            }
        }
    }
    let mu = match rng.gen_range(0..3) {
        0 => ConsumptionMeasure::point_mass(periods + 1, periods),
        1 => ConsumptionMeasure::uniform_over(periods + 1, 0..periods + 1),
        _ => {
            let mut w: Vec<f64> = (0..=periods)
                .map(|_| {
                    if rng.gen_bool(0.5) {
                        rng.gen_range(0.1..1.0)
                    } else {
                        0.0
                    }
                })
                .collect();
            w[periods] = rng.gen_range(0.3..1.0);
            let s: f64 = w.iter().sum();
            ConsumptionMeasure::new(w.iter().map(|v| v / s).collect())?
        }
    };
    let base = |rng: &mut ChaCha8Rng| {
        if rng.gen_bool(0.5) {
            UtilitySpec::power(rng.gen_range(0.2..0.8))
        } else {
            UtilitySpec::log()
        }
    };
    let utility = match rng.gen_range(0..3) {
        0 => UtilitySpec::power(rng.gen_range(0.2..0.8)),
        1 => UtilitySpec::log(),
        _ => {
            let b = base(rng);
            UtilitySpec::discounted(
                b,
                Discount::Exponential {
                    beta: rng.gen_range(0.0..0.3),
                },
            )
        }
    };
    let x = rng.gen_range(0.5..2.0);
    Ok(RandomInstance {
        scenario: MarketScenario::new(tree, prices, endowment, mu, cone)?,
        utility,
        x,
        cone_kind,
    })
}
