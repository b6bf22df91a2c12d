use std::fmt;

use super::scenario::MarketScenario;
use super::tree::NodeId;
use crate::dual_domain::supermartingale_constraints;

const TOL_PROB: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    NonPositiveProbability,
    ProbabilitySum,
    NonFinite,
    EndowmentNegative,
    EndowmentRootNonzero,
    EndowmentDecreasing,
    MuTotal,
    MuExhausted,
    EmptyCone,
    NoArbitrage,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub node: Option<NodeId>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_pass(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }

    fn push(&mut self, kind: ViolationKind, node: Option<NodeId>, message: String) {
        self.violations.push(Violation {
            kind,
            node,
            message,
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "pass");
        }
        let msgs: Vec<&str> = self.violations.iter().map(|v| v.message.as_str()).collect();
        write!(f, "{}", msgs.join("; "))
    }
}

/// Checks the standing hypotheses on a scenario: full-support transition
/// probabilities, adapted finite data, nondecreasing endowment starting at
/// zero, μ a probability with mass left before the horizon, and the
/// existence of a supermartingale measure with full support.
pub fn validate_scenario(s: &MarketScenario) -> ValidationReport {
    let mut report = ValidationReport::default();
    let tree = s.tree();
    for id in tree.interior_nodes() {
        let children = tree.children(id);
        let mut sum = 0.0;
        for &c in children {
            let p = tree.node(c).cond_prob;
            if !(p > 0.0) {
                report.push(
                    ViolationKind::NonPositiveProbability,
                    Some(c),
                    format!("node {c}: conditional probability {p} is not strictly positive"),
                );
            }
            sum += p;
        }
        if (sum - 1.0).abs() > TOL_PROB {
            report.push(
                ViolationKind::ProbabilitySum,
                Some(id),
                format!("node {id}: children probabilities sum to {sum} (probabilities sum != 1)"),
            );
        }
    }
    for id in tree.forward_order() {
        if s.price(id).iter().any(|v| !v.is_finite()) || !s.endowment()[id].is_finite() {
            report.push(
                ViolationKind::NonFinite,
                Some(id),
                format!("node {id}: non-finite price or endowment"),
            );
        }
        let e = s.endowment()[id];
        if e < 0.0 {
            report.push(
                ViolationKind::EndowmentNegative,
                Some(id),
                format!("node {id}: negative endowment {e}"),
            );
        }
        match tree.parent(id) {
            None => {
                if e != 0.0 {
                    report.push(
                        ViolationKind::EndowmentRootNonzero,
                        Some(id),
                        format!("root endowment is {e}, expected 0"),
                    );
                }
            }
            Some(p) => {
                if e < s.endowment()[p] - TOL_PROB {
                    report.push(
                        ViolationKind::EndowmentDecreasing,
                        Some(id),
                        format!(
                            "node {id}: cumulative endowment decreases from {} to {e}",
                            s.endowment()[p]
                        ),
                    );
                }
            }
        }
    }
    let w = s.mu().weights();
    let total: f64 = w.iter().sum();
    if (total - 1.0).abs() > TOL_PROB {
        report.push(
            ViolationKind::MuTotal,
            None,
            format!("mu has total mass {total}, expected 1"),
        );
    }
    let horizon = tree.horizon();
    let mut acc = 0.0;
    for (i, wi) in w.iter().enumerate().take(horizon) {
        acc += wi;
        if acc >= 1.0 - TOL_PROB {
            report.push(
                ViolationKind::MuExhausted,
                None,
                format!("mu([0,t])<1 violated at t<T: mass {acc} reached at time index {i}"),
            );
            break;
        }
    }
    if s.cone().generators().is_empty()
        || s.cone()
            .generators()
            .iter()
            .all(|g| g.iter().all(|v| *v == 0.0))
    {
        report.push(
            ViolationKind::EmptyCone,
            None,
            "cone has no nonzero generator".into(),
        );
    }
    if !report.has(ViolationKind::NonFinite) {
        let poly = supermartingale_constraints(s);
        match poly.interior_point() {
            Some((_, margin)) if margin > 0.0 => {}
            _ => report.push(
                ViolationKind::NoArbitrage,
                None,
                "supermartingale polytope has no strictly positive member (empty interior)".into(),
            ),
        }
    }
    report
}
