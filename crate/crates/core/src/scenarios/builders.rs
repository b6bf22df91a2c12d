use crate::error::{Error, Result};
use crate::market::{ConstraintCone, ConsumptionMeasure, EventTree, MarketScenario};
use crate::utility::{UtilityField, UtilitySpec};

fn binomial(
    u: f64,
    d: f64,
    p: f64,
    n: usize,
    s0: f64,
    cone: ConstraintCone,
) -> Result<MarketScenario> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(format!(
            "branch probability must lie in (0, 1), got {p}"
        )));
    }
    if n == 0 {
        return Err(Error::invalid("binomial tree needs at least one period"));
    }
    if !(s0 > 0.0 && d > 0.0) {
        return Err(Error::invalid("prices must stay positive"));
    }
    if !(d < 1.0 && 1.0 < u) {
        return Err(Error::NoArbitrage);
    }
    let grid: Vec<f64> = (0..=n).map(|i| i as f64).collect();
    let tree = EventTree::uniform(grid, &[p, 1.0 - p])?;
    let mut prices = vec![vec![s0]; tree.num_nodes()];
    for id in tree.forward_order() {
        if let Some(par) = tree.parent(id) {
            let up = tree.children(par)[0] == id;
            prices[id] = vec![prices[par][0] * if up { u } else { d }];
        }
    }
    let mu = ConsumptionMeasure::point_mass(n + 1, n);
    let endowment = vec![0.0; tree.num_nodes()];
    MarketScenario::new(tree, prices, endowment, mu, cone)
}

/// N-period binomial tree (up factor u, down factor d, up probability p),
/// unconstrained holdings, consumption only at the horizon, no endowment.
/// The one-step martingale probability is (1 − d)/(u − d).
pub fn complete_binomial(u: f64, d: f64, p: f64, n: usize, s0: f64) -> Result<MarketScenario> {
    binomial(u, d, p, n, s0, ConstraintCone::unconstrained(1))
}

/// As [`complete_binomial`] with short sales prohibited (holdings ≥ 0).
pub fn no_short_sale(u: f64, d: f64, p: f64, n: usize) -> Result<MarketScenario> {
    binomial(u, d, p, n, 1.0, ConstraintCone::nonnegative(1))
}

/// Consumption against an endowment stream with no hedging instrument:
/// a binomial information tree (p, 1 − p) on times 0..N, a constant
/// asset price, μ uniform on t₁..t_N and endowment accrued at those same
/// points, `ℰ_n = Σ_{m ≤ n, t(m) ≥ t₁} ε(m)/N`. `rates` holds ε per node
/// (the root entry is ignored).
pub fn lakner_slud(rates: &[f64], p: f64, n: usize) -> Result<MarketScenario> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(format!(
            "branch probability must lie in (0, 1), got {p}"
        )));
    }
    if n == 0 {
        return Err(Error::invalid("needs at least one period"));
    }
    let grid: Vec<f64> = (0..=n).map(|i| i as f64).collect();
    let tree = EventTree::uniform(grid, &[p, 1.0 - p])?;
    if rates.len() != tree.num_nodes() {
        return Err(Error::Dimension {
            context: "endowment rates",
            expected: tree.num_nodes(),
            actual: rates.len(),
        });
    }
    if let Some(i) = rates.iter().position(|r| !(r.is_finite() && *r >= 0.0)) {
        return Err(Error::invalid(format!(
            "endowment rate at node {i} must be nonnegative"
        )));
    }
    let mu = ConsumptionMeasure::uniform_over(n + 1, 1..n + 1);
    let mut endowment = vec![0.0; tree.num_nodes()];
    for id in tree.forward_order() {
        if let Some(par) = tree.parent(id) {
            endowment[id] = endowment[par] + rates[id] * mu.weight(tree.time_index(id));
        }
    }
    if tree.terminals().iter().any(|&t| !(endowment[t] > 0.0)) {
        return Err(Error::invalid(
            "terminal endowment must be bounded away from zero on every path (zero total endowment)",
        ));
    }
    let prices = vec![vec![1.0]; tree.num_nodes()];
    MarketScenario::new(
        tree,
        prices,
        endowment,
        mu,
        ConstraintCone::unconstrained(1),
    )
}

/// [`lakner_slud`] with the same rate at every node.
pub fn lakner_slud_constant(rate: f64, p: f64, n: usize) -> Result<MarketScenario> {
    let nodes = (1usize << (n + 1)) - 1;
    lakner_slud(&vec![rate; nodes], p, n)
}

/// Both formulations of a consumption-plus-terminal-wealth problem.
#[derive(Debug, Clone)]
pub struct MixedFormulations {
    /// running consumption weighted by Δt at t₀..t_{N−1} plus terminal
    /// wealth with weight 1; utilities U₁ then U₂
    pub direct: MarketScenario,
    pub direct_utility: UtilitySpec,
    /// single consumption measure `μ = Σ Δtᵢ/(2T) δ_{tᵢ} + ½ δ_T` with
    /// `U(t, x) = 2T U₁(t, x/2T)` before T and `2 U₂(x/2)` at T
    pub embedded: MarketScenario,
    pub embedded_utility: UtilitySpec,
    /// T
    pub horizon: f64,
}

impl MixedFormulations {
    /// Maps an embedded consumption rate to the direct formulation's
    /// variables: running rate `ĉ/(2T)`, terminal wealth `ĉ_T/2`.
    pub fn to_direct(&self, embedded_rate: &[f64]) -> Vec<f64> {
        let tree = self.embedded.tree();
        (0..tree.num_nodes())
            .map(|n| {
                if tree.time_index(n) == tree.horizon() {
                    embedded_rate[n] / 2.0
                } else {
                    embedded_rate[n] / (2.0 * self.horizon)
                }
            })
            .collect()
    }
}

/// Embeds utility from running consumption (U₁) and terminal wealth (U₂)
/// into a single consumption problem on the market of `base`. Rejects
/// pairs whose marginal utilities are not comparable at infinity.
pub fn mixed_consumption_terminal(
    u1: UtilitySpec,
    u2: UtilitySpec,
    base: &MarketScenario,
) -> Result<MixedFormulations> {
    let tree = base.tree();
    let grid = tree.time_grid();
    let n = tree.horizon();
    if n == 0 {
        return Err(Error::invalid("needs at least one period"));
    }
    let horizon = grid[n];
    let mut direct_w: Vec<f64> = (0..n).map(|i| grid[i + 1] - grid[i]).collect();
    direct_w.push(1.0);
    let mut emb_w: Vec<f64> = (0..n)
        .map(|i| (grid[i + 1] - grid[i]) / (2.0 * horizon))
        .collect();
    emb_w.push(0.5);
    let direct_utility = UtilitySpec::mixed(u1.clone(), u2.clone());
    let embedded_utility = UtilitySpec::mixed(
        UtilitySpec::scaled(u1, 2.0 * horizon, 1.0 / (2.0 * horizon)),
        UtilitySpec::scaled(u2, 2.0, 0.5),
    );
    // compatibility of the running and terminal parts
    UtilityField::resolve(&direct_utility, tree)?;
    UtilityField::resolve(&embedded_utility, tree)?;
    Ok(MixedFormulations {
        direct: base.with_mu(ConsumptionMeasure::new(direct_w)?)?,
        direct_utility,
        embedded: base.with_mu(ConsumptionMeasure::new(emb_w)?)?,
        embedded_utility,
        horizon,
    })
}
