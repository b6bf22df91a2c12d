use serde::{Deserialize, Serialize};

use super::point::{Base, PointUtility};
use crate::error::{Error, Result};
use crate::market::{EventTree, NodeId};

/// Time discount applied multiplicatively to a base utility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Discount {
    /// ψ(t) = exp(−β t) on the time grid
    Exponential { beta: f64 },
    /// ψ indexed by time index
    Table { psi: Vec<f64> },
}

/// Declarative description of a utility random field on an event tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum UtilitySpec {
    Power {
        alpha: f64,
    },
    Log,
    /// ψ(t)·Û(x)
    Discounted {
        base: Box<UtilitySpec>,
        discount: Discount,
    },
    /// `running` before the horizon, `terminal` at it
    Mixed {
        running: Box<UtilitySpec>,
        terminal: Box<UtilitySpec>,
    },
    /// U₁(t, B_n x) with a positive factor per node
    StochasticDiscount {
        base: Box<UtilitySpec>,
        factors: Vec<f64>,
    },
    /// outer · U(t, inner · x)
    Scaled {
        base: Box<UtilitySpec>,
        outer: f64,
        inner: f64,
    },
}

impl UtilitySpec {
    pub fn power(alpha: f64) -> Self {
        UtilitySpec::Power { alpha }
    }

    pub fn log() -> Self {
        UtilitySpec::Log
    }

    pub fn discounted(base: UtilitySpec, discount: Discount) -> Self {
        UtilitySpec::Discounted {
            base: Box::new(base),
            discount,
        }
    }

    pub fn mixed(running: UtilitySpec, terminal: UtilitySpec) -> Self {
        UtilitySpec::Mixed {
            running: Box::new(running),
            terminal: Box::new(terminal),
        }
    }

    pub fn stochastic_discount(base: UtilitySpec, factors: Vec<f64>) -> Self {
        UtilitySpec::StochasticDiscount {
            base: Box::new(base),
            factors,
        }
    }

    pub fn scaled(base: UtilitySpec, outer: f64, inner: f64) -> Self {
        UtilitySpec::Scaled {
            base: Box::new(base),
            outer,
            inner,
        }
    }

    /// Short family tag as used in scenario files.
    pub fn family(&self) -> &'static str {
        match self {
            UtilitySpec::Power { .. } => "power",
            UtilitySpec::Log => "log",
            UtilitySpec::Discounted { .. } => "discounted",
            UtilitySpec::Mixed { .. } => "mixed",
            UtilitySpec::StochasticDiscount { .. } => "stochastic_discount",
            UtilitySpec::Scaled { .. } => "scaled",
        }
    }

    /// Checks parameters that do not depend on the tree.
    pub fn check(&self) -> Result<()> {
        let positive = |v: f64, what: &str| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(format!(
                    "{what} must be positive and finite, got {v}"
                )))
            }
        };
        match self {
            UtilitySpec::Power { alpha } => {
                if !(*alpha > 0.0 && *alpha < 1.0) {
                    return Err(Error::invalid(format!(
                        "power utility needs 0 < alpha < 1, got {alpha}"
                    )));
                }
                Ok(())
            }
            UtilitySpec::Log => Ok(()),
            UtilitySpec::Discounted { base, discount } => {
                match discount {
                    Discount::Exponential { beta } => {
                        if !beta.is_finite() {
                            return Err(Error::invalid("discount rate must be finite"));
                        }
                    }
                    Discount::Table { psi } => {
                        for &v in psi {
                            positive(v, "discount factor")?;
                        }
                    }
                }
                base.check()
            }
            UtilitySpec::Mixed { running, terminal } => {
                running.check()?;
                terminal.check()
            }
            UtilitySpec::StochasticDiscount { base, factors } => {
                for &v in factors {
                    positive(v, "stochastic discount factor")?;
                }
                base.check()
            }
            UtilitySpec::Scaled { base, outer, inner } => {
                positive(*outer, "outer scale")?;
                positive(*inner, "inner scale")?;
                base.check()
            }
        }
    }

    /// The closed-form utility in force at `node`.
    pub fn point(&self, tree: &EventTree, node: NodeId) -> Result<PointUtility> {
        Ok(match self {
            UtilitySpec::Power { alpha } => PointUtility::new(Base::Power { alpha: *alpha }),
            UtilitySpec::Log => PointUtility::new(Base::Log),
            UtilitySpec::Discounted { base, discount } => {
                let psi = match discount {
                    Discount::Exponential { beta } => (-beta * tree.time(node)).exp(),
                    Discount::Table { psi } => {
                        let i = tree.time_index(node);
                        *psi.get(i).ok_or(Error::Dimension {
                            context: "discount table",
                            expected: tree.time_grid().len(),
                            actual: psi.len(),
                        })?
                    }
                };
                base.point(tree, node)?.scaled(psi, 1.0)
            }
            UtilitySpec::Mixed { running, terminal } => {
                if tree.time_index(node) == tree.horizon() {
                    terminal.point(tree, node)?
                } else {
                    running.point(tree, node)?
                }
            }
            UtilitySpec::StochasticDiscount { base, factors } => {
                if factors.len() != tree.num_nodes() {
                    return Err(Error::Dimension {
                        context: "stochastic discount factors",
                        expected: tree.num_nodes(),
                        actual: factors.len(),
                    });
                }
                base.point(tree, node)?.scaled(1.0, factors[node])
            }
            UtilitySpec::Scaled { base, outer, inner } => {
                base.point(tree, node)?.scaled(*outer, *inner)
            }
        })
    }
}
