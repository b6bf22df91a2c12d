//! Utility random fields on event trees: closed-form node utilities,
//! conjugates and inverse marginals, envelopes, bounding utilities and
//! elasticity diagnostics.

mod conjugate;
mod elasticity;
mod envelope;
mod field;
mod point;
mod spec;

pub use conjugate::{invert_marginal, numeric_conjugate};
pub use elasticity::{asymptotic_elasticity, ElasticityReport, GammaReport, ELASTICITY_MARGIN};
pub use envelope::{envelopes, Bound, MixKind, PowerMix};
pub use field::UtilityField;
pub use point::{Base, PointUtility};
pub use spec::{Discount, UtilitySpec};
