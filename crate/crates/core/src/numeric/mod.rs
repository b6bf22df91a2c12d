//! Small dense numerical kernels: bracketed root finding, a simplex LP
//! solver and a dual active-set QP solver.

pub mod lp;
pub mod qp;
pub mod roots;
