use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::builders::{
    complete_binomial, lakner_slud, lakner_slud_constant, mixed_consumption_terminal, no_short_sale,
};
use super::random::{random_scenario, RandomShape};
use crate::error::{Error, Result};
use crate::market::{validate_scenario, MarketScenario};
use crate::utility::UtilitySpec;

pub const BUILDER_TAGS: [&str; 5] = [
    "complete_binomial",
    "no_short_sale",
    "lakner_slud",
    "mixed",
    "random",
];

/// A builder tag with its parameters, e.g.
/// `complete_binomial:u=2,d=0.5,p=0.5,n=1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub tag: String,
    pub params: BTreeMap<String, String>,
    pub seed: u64,
}

/// A built scenario and the utility its builder suggests, if any.
#[derive(Debug, Clone)]
pub struct Built {
    pub scenario: MarketScenario,
    pub utility: Option<UtilitySpec>,
}

impl ScenarioSpec {
    pub fn new(tag: &str) -> Self {
        Self {
            tag: tag.to_string(),
            params: BTreeMap::new(),
            seed: 0,
        }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.params.insert(key.to_string(), value.to_string());
        self
    }

    /// Parses `tag` or `tag:key=value,key=value`. Lists use `;`.
    pub fn parse(text: &str) -> Result<Self> {
        let (tag, rest) = match text.split_once(':') {
            Some((t, r)) => (t.trim(), r.trim()),
            None => (text.trim(), ""),
        };
        if !BUILDER_TAGS.contains(&tag) {
            return Err(Error::UnknownBuilder(tag.to_string()));
        }
        let mut spec = Self::new(tag);
        for item in rest.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (k, v) = item.split_once('=').ok_or_else(|| Error::Parse {
                path: format!("builder.{tag}"),
                message: format!("expected key=value, got '{item}'"),
            })?;
            spec.params
                .insert(k.trim().to_string(), v.trim().to_string());
        }
        if let Some(seed) = spec.params.get("seed") {
            spec.seed = seed.parse().map_err(|_| Error::Parse {
                path: format!("builder.{tag}.seed"),
                message: format!("not an integer: '{seed}'"),
            })?;
        }
        Ok(spec)
    }

    fn num(&self, key: &str, default: Option<f64>) -> Result<f64> {
        match self.params.get(key) {
            Some(v) => v.parse().map_err(|_| Error::Parse {
                path: format!("builder.{}.{key}", self.tag),
                message: format!("not a number: '{v}'"),
            }),
            None => default.ok_or_else(|| Error::Parse {
                path: format!("builder.{}.{key}", self.tag),
                message: "missing parameter".into(),
            }),
        }
    }

    fn count(&self, key: &str, default: usize) -> Result<usize> {
        let v = self.num(key, Some(default as f64))?;
        if v < 0.0 || v.fract() != 0.0 {
            return Err(Error::Parse {
                path: format!("builder.{}.{key}", self.tag),
                message: format!("expected a nonnegative integer, got {v}"),
            });
        }
        Ok(v as usize)
    }

    fn list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.params
            .get(key)
            .map(|v| {
                v.split(';')
                    .map(|x| {
                        x.trim().parse().map_err(|_| Error::Parse {
                            path: format!("builder.{}.{key}", self.tag),
                            message: format!("not a number: '{x}'"),
                        })
                    })
                    .collect()
            })
            .transpose()
    }

    fn utility_param(&self, key: &str) -> Result<UtilitySpec> {
        Ok(match self.params.get(key) {
            None => UtilitySpec::log(),
            Some(_) => UtilitySpec::power(self.num(key, None)?),
        })
    }

    /// Builds and validates the scenario.
    pub fn build(&self) -> Result<Built> {
        let built = match self.tag.as_str() {
            "complete_binomial" => Built {
                scenario: complete_binomial(
                    self.num("u", Some(2.0))?,
                    self.num("d", Some(0.5))?,
                    self.num("p", Some(0.5))?,
                    self.count("n", 1)?,
                    self.num("s0", Some(1.0))?,
                )?,
                utility: None,
            },
            "no_short_sale" => Built {
                scenario: no_short_sale(
                    self.num("u", Some(2.0))?,
                    self.num("d", Some(0.5))?,
                    self.num("p", Some(0.5))?,
                    self.count("n", 1)?,
                )?,
                utility: None,
            },
            "lakner_slud" => {
                let p = self.num("p", Some(0.5))?;
                let n = self.count("n", 1)?;
                let scenario = match self.list("rates")? {
                    Some(r) => lakner_slud(&r, p, n)?,
                    None => lakner_slud_constant(self.num("e", Some(1.0))?, p, n)?,
                };
                Built {
                    scenario,
                    utility: None,
                }
            }
            "mixed" => {
                let base = complete_binomial(
                    self.num("u", Some(2.0))?,
                    self.num("d", Some(0.5))?,
                    self.num("p", Some(0.5))?,
                    self.count("n", 2)?,
                    1.0,
                )?;
                let m = mixed_consumption_terminal(
                    self.utility_param("alpha1")?,
                    self.utility_param("alpha2")?,
                    &base,
                )?;
                Built {
                    scenario: m.embedded,
                    utility: Some(m.embedded_utility),
                }
            }
            "random" => {
                let inst = random_scenario(
                    self.seed,
                    RandomShape {
                        max_periods: self.count("periods", 3)?,
                        max_branches: self.count("branches", 3)?,
                        max_charged: usize::MAX,
                    },
                )?;
                Built {
                    scenario: inst.scenario,
                    utility: Some(inst.utility),
                }
            }
            other => return Err(Error::UnknownBuilder(other.to_string())),
        };
        let report = validate_scenario(&built.scenario);
        if !report.is_pass() {
            if report
                .violations
                .iter()
                .all(|v| v.kind == crate::market::ViolationKind::NoArbitrage)
            {
                return Err(Error::NoArbitrage);
            }
            return Err(Error::Validation(report));
        }
        Ok(built)
    }
}
