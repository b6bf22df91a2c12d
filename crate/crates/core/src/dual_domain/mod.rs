//! The dual domain: closure of the supermartingale measures of a scenario,
//! represented in terminal-weight (path) coordinates.

mod dd;
mod polytope;

pub use dd::{extreme_rays, RayLimit};
pub use polytope::{
    density_process, supermartingale_constraints, ConstraintRow, DensityProcess, DualMeasure,
    SupermartingalePolytope, MAX_VERTEX_COUNT, MAX_VERTEX_PATHS, TOL_MEMBERSHIP,
};
