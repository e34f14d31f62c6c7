//! The discrete saddle-point system
//!
//! ```text
//! c_h(u_h, η) + b_h(η, w_h) = <f_h, η>
//! b_h(u_h, ξ) - m_h(w_h, ξ) = <g_h, ξ>
//! ```
//!
//! i.e. `[[C, K], [K, -M]] [u; w] = [F; G]`, together with the discrete solution
//! operator of `b_h` (`G_h`) and the Ritz projection.

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::fem::{
    assemble_b_load, assemble_load, assemble_mass, assemble_point_load, assemble_stiffness,
    assemble_weighted_gradient_form, assemble_weighted_mass, FEFunction, QuadratureRule,
    SparseMatrix, SurfaceFunction,
};
use crate::geometry::{MatrixField, ScalarField};
use crate::linalg::{self, SparseCholesky, SparseLu};
use crate::mesh::SurfaceMesh;

/// Distance within which a point term must coincide with a mesh vertex.
pub const POINT_TOLERANCE: f64 = 1e-10;

/// Which `c` form the problem uses.
#[derive(Debug, Clone)]
pub enum FormKind {
    /// `c(u, v) = ∫ (P B P - 2) ∇u · ∇v + (C - 1) u v`.
    Standard { b: MatrixField, c: ScalarField },
    /// `c(u, v) = ∫ -∇u · ∇v + 2 u v`.
    Delta,
}

/// A weighted nodal evaluation `weight * v(location)` in the right-hand side `f`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointTerm {
    pub location: Vector3<f64>,
    pub weight: f64,
}

#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub form: FormKind,
    /// Smooth part of `f`, paired in `L2`.
    pub f: ScalarField,
    pub f_points: Vec<PointTerm>,
    pub g: ScalarField,
    pub exact_u: ScalarField,
    pub exact_w: ScalarField,
    /// Constant in `b(u, v) = ∫ ∇u · ∇v + λ u v`.
    pub lambda: f64,
}

#[derive(Debug, Clone)]
pub struct SaddleSystem<'m> {
    mesh: &'m SurfaceMesh,
    pub c: SparseMatrix,
    pub k: SparseMatrix,
    pub m: SparseMatrix,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
}

impl<'m> SaddleSystem<'m> {
    pub fn new(
        mesh: &'m SurfaceMesh,
        c: SparseMatrix,
        k: SparseMatrix,
        m: SparseMatrix,
        f: Vec<f64>,
        g: Vec<f64>,
    ) -> Result<Self> {
        let n = mesh.num_vertices();
        let square = |a: &SparseMatrix| a.nrows() == n && a.ncols() == n;
        if !(square(&c) && square(&k) && square(&m) && f.len() == n && g.len() == n) {
            return Err(Error::InvalidArgument(format!(
                "saddle system blocks must all have dimension {n}"
            )));
        }
        Ok(Self { mesh, c, k, m, f, g })
    }

    pub fn mesh(&self) -> &'m SurfaceMesh {
        self.mesh
    }

    pub fn dimension(&self) -> usize {
        self.mesh.num_vertices()
    }

    /// The `2V x 2V` operator `[[C, K], [K, -M]]`.
    pub fn block_matrix(&self) -> SparseMatrix {
        let n = self.dimension();
        let mut entries = Vec::with_capacity(self.c.nnz() + 2 * self.k.nnz() + self.m.nnz());
        entries.extend(self.c.triplets());
        entries.extend(self.k.triplets().map(|(i, j, v)| (i, j + n, v)));
        entries.extend(self.k.triplets().map(|(i, j, v)| (i + n, j, v)));
        entries.extend(self.m.triplets().map(|(i, j, v)| (i + n, j + n, -v)));
        let mut block = SparseMatrix::from_triplets(2 * n, 2 * n, &entries)
            .expect("block entries are in range by construction");
        if self.c.is_flagged_symmetric() && self.k.is_flagged_symmetric() && self.m.is_flagged_symmetric() {
            // Cannot fail: every block is exactly symmetric.
            let _ = block.flag_symmetric(0.0);
        }
        block
    }

    pub fn block_rhs(&self) -> Vec<f64> {
        self.f.iter().chain(&self.g).copied().collect()
    }

    /// `||A [u; w] - [F; G]|| / ||[F; G]||`.
    pub fn relative_residual(&self, u: &[f64], w: &[f64]) -> f64 {
        let x: Vec<f64> = u.iter().chain(w).copied().collect();
        linalg::relative_residual(&self.block_matrix(), &x, &self.block_rhs())
    }
}

/// Assembles all five blocks for `spec` on `mesh`.
pub fn build_system<'m>(
    spec: &ProblemSpec,
    mesh: &'m SurfaceMesh,
    quad: &QuadratureRule,
) -> Result<SaddleSystem<'m>> {
    let s = assemble_stiffness(mesh)?;
    let m = assemble_mass(mesh, quad)?;
    let k = SparseMatrix::linear_combination(1.0, &s, spec.lambda, &m)?;
    let c = match &spec.form {
        FormKind::Standard { b, c } => {
            let grad = assemble_weighted_gradient_form(mesh, &b.projected_minus_identity(2.0), quad)?;
            let shifted = ScalarField::linear_combination(1.0, c, -1.0, &ScalarField::constant(1.0));
            let mass = assemble_weighted_mass(mesh, &shifted, quad)?;
            SparseMatrix::linear_combination(1.0, &grad, 1.0, &mass)?
        }
        FormKind::Delta => SparseMatrix::linear_combination(-1.0, &s, 2.0, &m)?,
    };

    let mut f = assemble_load(mesh, &spec.f, quad)?;
    for point in &spec.f_points {
        let vertex = mesh.vertex_at(&point.location, POINT_TOLERANCE).map_err(|e| {
            Error::Configuration(format!("point term of `{}` is not at a mesh vertex: {e}", spec.name))
        })?;
        let load = assemble_point_load(mesh, vertex, point.weight)?;
        f.iter_mut().zip(load).for_each(|(a, b)| *a += b);
    }
    let g = assemble_load(mesh, &spec.g, quad)?;
    SaddleSystem::new(mesh, c, k, m, f, g)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverKind {
    /// Sparse LU of the full block matrix.
    #[default]
    Direct,
    /// MINRES preconditioned with `diag(K, M)`.
    Iterative,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub tol: f64,
    pub solver: SolverKind,
    /// Iteration cap for MINRES; defaults to the system size.
    pub max_iterations: Option<usize>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            solver: SolverKind::Direct,
            max_iterations: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport<'m> {
    pub u: FEFunction<'m>,
    pub w: FEFunction<'m>,
    pub relative_residual: f64,
    pub solver: SolverKind,
    /// MINRES iterations, or refinement steps after the LU solve.
    pub iterations: usize,
}

pub fn solve<'m>(system: &SaddleSystem<'m>, options: &SolveOptions) -> Result<SolveReport<'m>> {
    let tol = options.tol;
    if !(tol > 0.0 && tol <= 1e-6) {
        return Err(Error::InvalidArgument(format!(
            "solver tolerance must lie in (0, 1e-6], got {tol}"
        )));
    }
    let n = system.dimension();
    let a = system.block_matrix();
    let rhs = system.block_rhs();

    let (x, residual, iterations) = if linalg::norm(&rhs) == 0.0 {
        (vec![0.0; 2 * n], 0.0, 0)
    } else {
        match options.solver {
            SolverKind::Direct => {
                let lu = SparseLu::new(&a)?;
                let (x, res, steps) = linalg::refined_solve(&a, &rhs, tol, 3, |b| lu.solve(b));
                if !x.iter().all(|v| v.is_finite()) || !res.is_finite() {
                    return Err(Error::Solver {
                        message: "block matrix is numerically singular".into(),
                        residual: None,
                    });
                }
                (x, res, steps)
            }
            SolverKind::Iterative => {
                let k = SparseCholesky::new(&system.k)?;
                let m = SparseCholesky::new(&system.m)?;
                let precondition = |r: &[f64]| {
                    let mut z = k.solve(&r[..n]);
                    z.extend(m.solve(&r[n..]));
                    z
                };
                let cap = options.max_iterations.unwrap_or(2 * n);
                let out = linalg::minres(&a, &rhs, tol, cap, precondition);
                if !out.converged {
                    return Err(Error::Solver {
                        message: format!("MINRES did not converge in {cap} iterations"),
                        residual: Some(out.relative_residual),
                    });
                }
                (out.x, out.relative_residual, out.iterations)
            }
        }
    };
    if residual > tol {
        return Err(Error::Solver {
            message: format!("relative residual {residual:e} exceeds tolerance {tol:e}"),
            residual: Some(residual),
        });
    }
    let mut u = x;
    let w = u.split_off(n);
    Ok(SolveReport {
        u: FEFunction::new(system.mesh, u)?,
        w: FEFunction::new(system.mesh, w)?,
        relative_residual: residual,
        solver: options.solver,
        iterations,
    })
}

/// Relative residual required of every `K` solve.
pub const B_SOLVE_TOLERANCE: f64 = 1e-12;

/// Factorized `K = S + λ M`: the Riesz map of `b_h`.
pub struct BFormSolver<'m> {
    mesh: &'m SurfaceMesh,
    lambda: f64,
    k: SparseMatrix,
    factor: SparseCholesky,
}

impl<'m> BFormSolver<'m> {
    pub fn new(mesh: &'m SurfaceMesh, lambda: f64, quad: &QuadratureRule) -> Result<Self> {
        let k = SparseMatrix::linear_combination(
            1.0,
            &assemble_stiffness(mesh)?,
            lambda,
            &assemble_mass(mesh, quad)?,
        )?;
        Self::from_matrix(mesh, lambda, k)
    }

    pub fn from_matrix(mesh: &'m SurfaceMesh, lambda: f64, k: SparseMatrix) -> Result<Self> {
        let factor = SparseCholesky::new(&k)?;
        Ok(Self { mesh, lambda, k, factor })
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.k
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        if rhs.len() != self.k.nrows() {
            return Err(Error::InvalidArgument(format!(
                "right-hand side of length {} for {} unknowns",
                rhs.len(),
                self.k.nrows()
            )));
        }
        let (x, res, _) = linalg::refined_solve(&self.k, rhs, B_SOLVE_TOLERANCE, 3, |b| self.factor.solve(b));
        if !(res <= B_SOLVE_TOLERANCE) {
            return Err(Error::Solver {
                message: format!("b-form solve reached relative residual {res:e}"),
                residual: Some(res),
            });
        }
        Ok(x)
    }

    /// `G_h`: the discrete function `g` with `b_h(g, ξ) = <rhs, ξ>` for all `ξ`.
    pub fn apply_gh(&self, rhs: &[f64]) -> Result<FEFunction<'m>> {
        FEFunction::new(self.mesh, self.solve(rhs)?)
    }

    /// `Π_h φ`: `b_h(Π_h φ, v) = b_h(φ, v)` for all discrete `v`.
    pub fn ritz_project(&self, phi: &impl SurfaceFunction, quad: &QuadratureRule) -> Result<FEFunction<'m>> {
        let load = assemble_b_load(self.mesh, phi, self.lambda, quad)?;
        self.apply_gh(&load)
    }
}

/// `G_h` with `λ = 1` and the default assembly quadrature.
pub fn apply_gh<'m>(mesh: &'m SurfaceMesh, rhs: &[f64]) -> Result<FEFunction<'m>> {
    BFormSolver::new(mesh, 1.0, &QuadratureRule::edge_midpoints())?.apply_gh(rhs)
}

/// Ritz projection with `λ = 1`; `quad` is used for both the mass matrix and the load.
pub fn ritz_project<'m>(
    mesh: &'m SurfaceMesh,
    phi: &impl SurfaceFunction,
    quad: &QuadratureRule,
) -> Result<FEFunction<'m>> {
    BFormSolver::new(mesh, 1.0, quad)?.ritz_project(phi, quad)
}
