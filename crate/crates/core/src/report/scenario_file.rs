//! Scenario files: TOML documents with `tree`, `prices`, `endowment`, `mu`,
//! `cone` and `utility` sections, or a `builder` tag plus `utility`.

use std::path::Path;

use toml::Value;

use crate::error::{Error, Result};
use crate::market::{
    validate_scenario, ConstraintCone, ConsumptionMeasure, EventTree, MarketScenario, NodeSpec,
    ViolationKind,
};
use crate::scenarios::ScenarioSpec;
use crate::utility::{Discount, UtilityField, UtilitySpec};

/// A validated scenario with its utility field.
#[derive(Debug, Clone)]
pub struct LoadedScenario {
    pub scenario: MarketScenario,
    pub utility: UtilitySpec,
    pub field: UtilityField,
}

fn perr(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.into(),
        message: message.into(),
    }
}

fn get<'v>(table: &'v Value, key: &str, path: &str) -> Result<&'v Value> {
    table
        .get(key)
        .ok_or_else(|| perr(format!("{path}.{key}"), "missing field"))
}

fn as_f64(v: &Value, path: &str) -> Result<f64> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        _ => Err(perr(
            path,
            format!("expected a number, got {}", v.type_str()),
        )),
    }
}

fn as_usize(v: &Value, path: &str) -> Result<usize> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as usize),
        _ => Err(perr(path, "expected a nonnegative integer")),
    }
}

fn f64_list(v: &Value, path: &str) -> Result<Vec<f64>> {
    let arr = v
        .as_array()
        .ok_or_else(|| perr(path, "expected an array"))?;
    arr.iter()
        .enumerate()
        .map(|(i, x)| as_f64(x, &format!("{path}[{i}]")))
        .collect()
}

fn f64_matrix(v: &Value, path: &str) -> Result<Vec<Vec<f64>>> {
    let arr = v
        .as_array()
        .ok_or_else(|| perr(path, "expected an array of arrays"))?;
    arr.iter()
        .enumerate()
        .map(|(i, row)| f64_list(row, &format!("{path}[{i}]")))
        .collect()
}

/// Parses a utility table such as `{ family = "power", alpha = 0.5 }`.
pub fn parse_utility(v: &Value, path: &str) -> Result<UtilitySpec> {
    let family = get(v, "family", path)?
        .as_str()
        .ok_or_else(|| perr(format!("{path}.family"), "expected a string"))?;
    let num = |key: &str| -> Result<f64> { as_f64(get(v, key, path)?, &format!("{path}.{key}")) };
    let sub = |key: &str| -> Result<UtilitySpec> {
        parse_utility(get(v, key, path)?, &format!("{path}.{key}"))
    };
    let spec = match family {
        "power" => UtilitySpec::power(num("alpha")?),
        "log" => UtilitySpec::log(),
        "discounted" => {
            let discount = match (v.get("beta"), v.get("psi")) {
                (Some(b), None) => Discount::Exponential {
                    beta: as_f64(b, &format!("{path}.beta"))?,
                },
                (None, Some(p)) => Discount::Table {
                    psi: f64_list(p, &format!("{path}.psi"))?,
                },
                _ => {
                    return Err(perr(
                        path,
                        "discounted utility needs exactly one of 'beta' or 'psi'",
                    ))
                }
            };
            UtilitySpec::discounted(sub("base")?, discount)
        }
        "mixed" => UtilitySpec::mixed(sub("running")?, sub("terminal")?),
        "stochastic_discount" => UtilitySpec::stochastic_discount(
            sub("base")?,
            f64_list(get(v, "factors", path)?, &format!("{path}.factors"))?,
        ),
        "scaled" => UtilitySpec::scaled(sub("base")?, num("outer")?, num("inner")?),
        other => return Err(Error::UnknownFamily(other.to_string())),
    };
    spec.check().map_err(|e| perr(path, e.to_string()))?;
    Ok(spec)
}

/// Parses a `--utility` style string: `log`, `power:0.5`, or an inline
/// TOML table `{ family = "...", ... }`.
pub fn parse_utility_str(text: &str) -> Result<UtilitySpec> {
    let t = text.trim();
    if t.starts_with('{') {
        let doc: Value =
            toml::from_str(&format!("u = {t}")).map_err(|e| perr("utility", e.to_string()))?;
        return parse_utility(&doc["u"], "utility");
    }
    let (family, arg) = match t.split_once(':') {
        Some((f, a)) => (f, Some(a)),
        None => (t, None),
    };
    let spec = match (family, arg) {
        ("log", None) => UtilitySpec::log(),
        ("power", Some(a)) => UtilitySpec::power(
            a.parse()
                .map_err(|_| perr("utility.alpha", format!("not a number: '{a}'")))?,
        ),
        ("power", None) => {
            return Err(perr("utility.alpha", "power utility needs 'power:<alpha>'"))
        }
        (other, _) => return Err(Error::UnknownFamily(other.to_string())),
    };
    spec.check()?;
    Ok(spec)
}

fn parse_tree(doc: &Value) -> Result<(EventTree, Vec<usize>)> {
    let tree =
        get(doc, "tree", "").map_err(|_| perr("tree", "missing section (or give a [builder])"))?;
    let grid = f64_list(get(tree, "time_grid", "tree")?, "tree.time_grid")?;
    let nodes = get(tree, "nodes", "tree")?
        .as_array()
        .ok_or_else(|| perr("tree.nodes", "expected an array of tables"))?;
    let n = nodes.len();
    let mut specs: Vec<Option<NodeSpec>> = vec![None; n];
    // position in the file of every node id, for error paths
    let mut position = vec![0usize; n];
    for (i, node) in nodes.iter().enumerate() {
        let path = format!("tree.nodes[{i}]");
        let id = as_usize(get(node, "id", &path)?, &format!("{path}.id"))?;
        if id >= n {
            return Err(perr(
                format!("{path}.id"),
                format!("node ids must be 0..{}; got {id}", n - 1),
            ));
        }
        if specs[id].is_some() {
            return Err(perr(
                format!("{path}.id"),
                format!("duplicate node id {id}"),
            ));
        }
        let parent = match node.get("parent") {
            None => None,
            Some(p) => Some(as_usize(p, &format!("{path}.parent"))?),
        };
        specs[id] = Some(NodeSpec {
            parent,
            time_index: as_usize(
                get(node, "time_index", &path)?,
                &format!("{path}.time_index"),
            )?,
            cond_prob: as_f64(get(node, "cond_prob", &path)?, &format!("{path}.cond_prob"))?,
        });
        position[id] = i;
    }
    let specs: Vec<NodeSpec> = specs
        .into_iter()
        .map(|s| s.expect("ids are dense"))
        .collect();
    let tree = EventTree::new(&specs, grid).map_err(|e| perr("tree", e.to_string()))?;
    Ok((tree, position))
}

fn violation_path(kind: ViolationKind, node: Option<usize>, position: &[usize]) -> String {
    let at = |field: &str| match node {
        Some(n) if n < position.len() => format!("{field}[{}]", position[n]),
        _ => field.to_string(),
    };
    match kind {
        ViolationKind::NonPositiveProbability => format!("{}.cond_prob", at("tree.nodes")),
        ViolationKind::ProbabilitySum => format!("{} (children)", at("tree.nodes")),
        ViolationKind::NonFinite => node.map_or("prices".into(), |n| format!("prices.values[{n}]")),
        ViolationKind::EndowmentNegative
        | ViolationKind::EndowmentRootNonzero
        | ViolationKind::EndowmentDecreasing => node.map_or("endowment.values".into(), |n| {
            format!("endowment.values[{n}]")
        }),
        ViolationKind::MuTotal | ViolationKind::MuExhausted => "mu.weights".into(),
        ViolationKind::EmptyCone => "cone.generators".into(),
        ViolationKind::NoArbitrage => "cone".into(),
    }
}

/// Validates a scenario, mapping failures to errors. Arbitrage alone is
/// reported as `NoArbitrage`; anything else carries the offending field.
pub(crate) fn check_valid(s: &MarketScenario, position: Option<&[usize]>) -> Result<()> {
    let report = validate_scenario(s);
    if report.is_pass() {
        return Ok(());
    }
    if report
        .violations
        .iter()
        .all(|v| v.kind == ViolationKind::NoArbitrage)
    {
        return Err(Error::NoArbitrage);
    }
    let first = report
        .violations
        .iter()
        .find(|v| v.kind != ViolationKind::NoArbitrage)
        .expect("some non-arbitrage violation");
    let identity: Vec<usize> = (0..s.tree().num_nodes()).collect();
    let path = violation_path(first.kind, first.node, position.unwrap_or(&identity));
    Err(perr(path, report.to_string()))
}

/// Parses scenario text. `origin` names the source in error messages.
pub fn parse_scenario(text: &str, origin: &str) -> Result<LoadedScenario> {
    let doc: Value =
        toml::from_str(text).map_err(|e| perr(origin, e.to_string().trim().to_string()))?;
    let utility_value = doc.get("utility");
    let (scenario, suggested, position) = if let Some(b) = doc.get("builder") {
        let tag = get(b, "tag", "builder")?
            .as_str()
            .ok_or_else(|| perr("builder.tag", "expected a string"))?;
        let built = ScenarioSpec::parse(tag)?.build()?;
        (built.scenario, built.utility, None)
    } else {
        let (tree, position) = parse_tree(&doc)?;
        let n = tree.num_nodes();
        let prices = match doc.get("prices") {
            Some(p) => f64_matrix(get(p, "values", "prices")?, "prices.values")?,
            None => return Err(perr("prices", "missing section")),
        };
        let endowment = match doc.get("endowment") {
            Some(e) => f64_list(get(e, "values", "endowment")?, "endowment.values")?,
            None => vec![0.0; n],
        };
        let mu = match doc.get("mu") {
            Some(m) => ConsumptionMeasure::new(f64_list(get(m, "weights", "mu")?, "mu.weights")?)
                .map_err(|e| perr("mu.weights", e.to_string()))?,
            None => return Err(perr("mu", "missing section")),
        };
        let d = prices.first().map_or(1, |p| p.len());
        let cone = match doc.get("cone") {
            Some(c) => ConstraintCone::from_generators(
                d,
                f64_matrix(get(c, "generators", "cone")?, "cone.generators")?,
            )
            .map_err(|e| perr("cone.generators", e.to_string()))?,
            None => ConstraintCone::unconstrained(d),
        };
        let s = MarketScenario::new(tree, prices, endowment, mu, cone)
            .map_err(|e| perr(origin, e.to_string()))?;
        (s, None, Some(position))
    };
    check_valid(&scenario, position.as_deref())?;
    let utility = match (utility_value, suggested) {
        (Some(u), _) => parse_utility(u, "utility")?,
        (None, Some(u)) => u,
        (None, None) => return Err(perr("utility", "missing section")),
    };
    resolve(scenario, utility)
}

fn resolve(scenario: MarketScenario, utility: UtilitySpec) -> Result<LoadedScenario> {
    let field = UtilityField::resolve(&utility, scenario.tree()).map_err(|e| match e {
        Error::UnknownFamily(_) | Error::Parse { .. } => e,
        other => perr("utility", other.to_string()),
    })?;
    Ok(LoadedScenario {
        scenario,
        utility,
        field,
    })
}

impl LoadedScenario {
    /// Same market with a different utility.
    pub fn with_utility(&self, utility: UtilitySpec) -> Result<Self> {
        resolve(self.scenario.clone(), utility)
    }
}

/// Builds a scenario from a builder tag such as `complete_binomial:n=2`.
/// Without an explicit utility the builder's suggestion is used.
pub fn load_builder(tag: &str, utility: Option<UtilitySpec>) -> Result<LoadedScenario> {
    let built = ScenarioSpec::parse(tag)?.build()?;
    check_valid(&built.scenario, None)?;
    let utility = utility.or(built.utility).ok_or_else(|| {
        perr(
            "utility",
            "builder has no default utility; pass one explicitly",
        )
    })?;
    resolve(built.scenario, utility)
}

/// Reads and parses a scenario file.
pub fn load_scenario(path: &Path) -> Result<LoadedScenario> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scenario(&text, &path.display().to_string())
}
