//! Numerical building blocks: quadrature, root finding, reference
//! distributions, dense linear algebra and a small LP solver.

pub mod distributions;
pub mod linalg;
pub mod lp;
pub mod quadrature;
pub mod roots;

pub use distributions::{Family, ParametricCdf, Tabulated};
pub use linalg::{solve_linear, Matrix};
pub use lp::{solve_lp, LinearProgram, LpSolution};
pub use quadrature::QuadratureRule;
pub use roots::{bisect, quantile};
