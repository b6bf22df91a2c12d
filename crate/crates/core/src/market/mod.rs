//! Event-tree market: filtration, prices, endowment, consumption clock,
//! portfolio cone, wealth dynamics and admissibility.

mod scenario;
mod strategy;
mod tree;
mod validate;

pub use scenario::{ConstraintCone, ConsumptionMeasure, MarketScenario, TOL_CONE};
pub use strategy::{
    cumulative_from_rate, increments, is_admissible_strategy, trading_gains, wealth_process,
    AdmissibilityReport, AdmissibilityViolation, Strategy, TOL_ADMISS,
};
pub use tree::{EventTree, Node, NodeId, NodeSpec};
pub use validate::{validate_scenario, ValidationReport, Violation, ViolationKind};
