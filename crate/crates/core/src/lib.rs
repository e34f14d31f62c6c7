//! Surface finite elements for second-order splittings of fourth-order PDEs.
//!
//! The crate assembles and solves the coupled system
//! `c(u, η) + b(η, w) = f(η)`, `b(u, ξ) - m(w, ξ) = g(ξ)` with piecewise linear
//! elements on octahedral triangulations of the unit sphere, and measures errors,
//! convergence orders and the constants of the discrete stability conditions.

pub mod analysis;
pub mod error;
pub mod fem;
pub mod geometry;
mod linalg;
pub mod mesh;
pub mod saddle;

pub use error::{Error, Result};
pub use fem::{FEFunction, QuadratureRule, SparseMatrix};
pub use geometry::{delta_problem_fields, smooth_problem_fields, MatrixField, ScalarField, UnitSphere};
pub use mesh::SurfaceMesh;
pub use saddle::{build_system, solve, ProblemSpec, SaddleSystem, SolveOptions, SolveReport, SolverKind};
