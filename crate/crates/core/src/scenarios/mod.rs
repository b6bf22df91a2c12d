//! Canonical scenario builders and the tag syntax used to address them.

mod builders;
mod random;
mod spec;

pub use builders::{
    complete_binomial, lakner_slud, lakner_slud_constant, mixed_consumption_terminal,
    no_short_sale, MixedFormulations,
};
pub use random::{random_scenario, RandomInstance, RandomShape};
pub use spec::{Built, ScenarioSpec, BUILDER_TAGS};
