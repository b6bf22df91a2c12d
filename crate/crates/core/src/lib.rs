pub mod dual_domain;
pub mod error;
pub mod exec;
pub mod market;
pub mod numeric;
pub mod report;
pub mod scenarios;
pub mod solver;
pub mod utility;

pub use error::{Error, Result, Stage};
