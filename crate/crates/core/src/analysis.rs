//! Error norms, experimental orders of convergence, and numerical estimates of the
//! constants in the discrete stability conditions.

use nalgebra::{Cholesky, DMatrix};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::{
    assemble_mass, assemble_stiffness, Element, QuadratureRule, SparseMatrix, SurfaceFunction,
};
use crate::geometry::ScalarField;
use crate::linalg;
use crate::mesh::SurfaceMesh;
use crate::saddle::{build_system, solve, BFormSolver, ProblemSpec, SaddleSystem, SolveOptions};

/// Dense inf-sup estimates are refused above this level.
pub const MAX_INF_SUP_LEVEL: u32 = 4;
/// Dense coercivity estimates are refused above this level.
pub const MAX_COERCIVITY_LEVEL: u32 = 3;

fn check_error_rule(quad: &QuadratureRule) -> Result<()> {
    if quad.degree() < 4 || !quad.is_interior() {
        return Err(Error::InvalidArgument(format!(
            "error integration needs an interior rule of degree >= 4, got degree {} (interior: {})",
            quad.degree(),
            quad.is_interior()
        )));
    }
    Ok(())
}

/// `∫_{Γ_h} integrand` with per-element contributions summed in element order.
fn integrate(
    mesh: &SurfaceMesh,
    quad: &QuadratureRule,
    integrand: impl Fn(usize, &Element, &[f64; 3]) -> Result<f64> + Sync,
) -> Result<f64> {
    let parts: Vec<f64> = (0..mesh.num_triangles())
        .into_par_iter()
        .map(|t| {
            let e = Element::of(mesh, t)?;
            let mut acc = 0.0;
            for (bary, w) in quad.iter() {
                acc += w * integrand(t, &e, bary)?;
            }
            Ok(acc * e.area)
        })
        .collect::<Result<_>>()?;
    Ok(parts.iter().sum())
}

/// `(||a - b||²_{L2(Γ_h)}, |a - b|²_{H1(Γ_h)})`; the seminorm only when `with_gradient`.
fn squared_distances(
    mesh: &SurfaceMesh,
    a: &impl SurfaceFunction,
    b: &impl SurfaceFunction,
    quad: &QuadratureRule,
    with_gradient: bool,
) -> Result<(f64, f64)> {
    let l2 = integrate(mesh, quad, |t, e, bary| {
        let d = a.value(t, e, bary)? - b.value(t, e, bary)?;
        Ok(d * d)
    })?;
    let h1 = if with_gradient {
        integrate(mesh, quad, |t, e, bary| {
            Ok((a.gradient(t, e, bary)? - b.gradient(t, e, bary)?).norm_squared())
        })?
    } else {
        0.0
    };
    Ok((l2, h1))
}

/// The zero function, for norms.
struct Zero;

impl SurfaceFunction for Zero {
    fn value(&self, _: usize, _: &Element, _: &[f64; 3]) -> Result<f64> {
        Ok(0.0)
    }
    fn gradient(&self, _: usize, _: &Element, _: &[f64; 3]) -> Result<nalgebra::Vector3<f64>> {
        Ok(nalgebra::Vector3::zeros())
    }
}

/// `||u_h - u ∘ p||_{L2(Γ_h)}`.
pub fn error_l2(
    mesh: &SurfaceMesh,
    fe: &impl SurfaceFunction,
    exact: &ScalarField,
    quad: &QuadratureRule,
) -> Result<f64> {
    check_error_rule(quad)?;
    Ok(squared_distances(mesh, fe, exact, quad, false)?.0.sqrt())
}

/// Full `H1(Γ_h)` norm of `u_h - u ∘ p`, with `∇_{Γ_h}(u ∘ p) = P_h J_p^T ∇_Γ u (p)`.
pub fn error_h1(
    mesh: &SurfaceMesh,
    fe: &impl SurfaceFunction,
    exact: &ScalarField,
    quad: &QuadratureRule,
) -> Result<f64> {
    check_error_rule(quad)?;
    if !exact.has_gradient() {
        return Err(Error::InvalidArgument(format!(
            "H1 error needs the gradient of `{}`",
            exact.name()
        )));
    }
    let (l2, semi) = squared_distances(mesh, fe, exact, quad, true)?;
    Ok((l2 + semi).sqrt())
}

pub fn l2_norm(mesh: &SurfaceMesh, f: &impl SurfaceFunction, quad: &QuadratureRule) -> Result<f64> {
    Ok(squared_distances(mesh, f, &Zero, quad, false)?.0.sqrt())
}

pub fn h1_norm(mesh: &SurfaceMesh, f: &impl SurfaceFunction, quad: &QuadratureRule) -> Result<f64> {
    let (l2, semi) = squared_distances(mesh, f, &Zero, quad, true)?;
    Ok((l2 + semi).sqrt())
}

/// `EOC_k = log(e_{k-1} / e_k) / log(h_{k-1} / h_k)` for `k >= 1`; entry 0 is always
/// `None`, as is any entry touching a non-positive or non-finite error.
pub fn eoc(errors: &[f64], hs: &[f64]) -> Result<Vec<Option<f64>>> {
    if errors.len() != hs.len() || errors.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "EOC needs two equally long sequences of length >= 2, got {} and {}",
            errors.len(),
            hs.len()
        )));
    }
    if hs.iter().any(|&h| !(h > 0.0)) || hs.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidArgument("mesh sizes must be positive and distinct".into()));
    }
    let ok = |e: f64| e > 0.0 && e.is_finite();
    Ok(std::iter::once(None)
        .chain((1..errors.len()).map(|k| {
            (ok(errors[k - 1]) && ok(errors[k]))
                .then(|| (errors[k - 1] / errors[k]).ln() / (hs[k - 1] / hs[k]).ln())
        }))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Norm {
    L2U,
    H1U,
    L2W,
    H1W,
}

impl Norm {
    pub const ALL: [Norm; 4] = [Norm::L2U, Norm::H1U, Norm::L2W, Norm::H1W];
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelInfo {
    pub level: u32,
    pub nominal_h: f64,
    pub measured_h: f64,
    /// Unknowns of the block system, `2V`.
    pub dofs: usize,
}

impl LevelInfo {
    pub fn of(mesh: &SurfaceMesh) -> Self {
        Self {
            level: mesh.level(),
            nominal_h: mesh.nominal_h(),
            measured_h: mesh.measured_h(),
            dofs: 2 * mesh.num_vertices(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRecord {
    pub info: LevelInfo,
    pub err_l2_u: f64,
    pub err_h1_u: f64,
    pub err_l2_w: f64,
    /// Absent when the exact `w` has no gradient (it is not in `H1`).
    pub err_h1_w: Option<f64>,
    pub residual: f64,
}

impl ErrorRecord {
    pub fn error(&self, norm: Norm) -> Option<f64> {
        match norm {
            Norm::L2U => Some(self.err_l2_u),
            Norm::H1U => Some(self.err_h1_u),
            Norm::L2W => Some(self.err_l2_w),
            Norm::H1W => self.err_h1_w,
        }
    }
}

#[derive(Debug)]
pub enum LevelOutcome {
    Solved(ErrorRecord),
    Failed { info: LevelInfo, error: Error },
}

impl LevelOutcome {
    pub fn info(&self) -> &LevelInfo {
        match self {
            LevelOutcome::Solved(r) => &r.info,
            LevelOutcome::Failed { info, .. } => info,
        }
    }

    pub fn record(&self) -> Option<&ErrorRecord> {
        match self {
            LevelOutcome::Solved(r) => Some(r),
            LevelOutcome::Failed { .. } => None,
        }
    }
}

#[derive(Debug)]
pub struct ConvergenceReport {
    pub problem: String,
    pub outcomes: Vec<LevelOutcome>,
}

impl ConvergenceReport {
    /// EOCs against the nominal mesh size; `None` for the first level and next to
    /// failed levels or missing norms.
    pub fn eoc(&self, norm: Norm) -> Vec<Option<f64>> {
        let mut out = vec![None; self.outcomes.len()];
        for k in 1..self.outcomes.len() {
            let (prev, cur) = (&self.outcomes[k - 1], &self.outcomes[k]);
            let errors = (
                prev.record().and_then(|r| r.error(norm)),
                cur.record().and_then(|r| r.error(norm)),
            );
            if let (Some(e0), Some(e1)) = errors {
                let hs = [prev.info().nominal_h, cur.info().nominal_h];
                out[k] = eoc(&[e0, e1], &hs).ok().and_then(|v| v[1]);
            }
        }
        out
    }

    pub fn all_solved(&self) -> bool {
        self.outcomes.iter().all(|o| o.record().is_some())
    }

    pub fn record_at(&self, level: u32) -> Option<&ErrorRecord> {
        self.outcomes
            .iter()
            .filter_map(LevelOutcome::record)
            .find(|r| r.info.level == level)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyOptions {
    pub quad_assembly: QuadratureRule,
    pub quad_error: QuadratureRule,
    pub solve: SolveOptions,
}

impl Default for StudyOptions {
    fn default() -> Self {
        Self {
            quad_assembly: QuadratureRule::edge_midpoints(),
            quad_error: QuadratureRule::dunavant6(),
            solve: SolveOptions::default(),
        }
    }
}

/// Assembles, solves and measures the errors on one mesh.
pub fn run_level(spec: &ProblemSpec, mesh: &SurfaceMesh, options: &StudyOptions) -> Result<ErrorRecord> {
    check_error_rule(&options.quad_error)?;
    let system = build_system(spec, mesh, &options.quad_assembly)?;
    let report = solve(&system, &options.solve)?;
    let q = &options.quad_error;
    let err_h1_w = if spec.exact_w.has_gradient() {
        Some(error_h1(mesh, &report.w, &spec.exact_w, q)?)
    } else {
        None
    };
    Ok(ErrorRecord {
        info: LevelInfo::of(mesh),
        err_l2_u: error_l2(mesh, &report.u, &spec.exact_u, q)?,
        err_h1_u: error_h1(mesh, &report.u, &spec.exact_u, q)?,
        err_l2_w: error_l2(mesh, &report.w, &spec.exact_w, q)?,
        err_h1_w,
        residual: report.relative_residual,
    })
}

/// Runs every level in `min_level..=max_level` in order. A failure at one level is
/// recorded and the remaining levels are still attempted.
pub fn convergence_study(
    spec: &ProblemSpec,
    min_level: u32,
    max_level: u32,
    options: &StudyOptions,
) -> Result<ConvergenceReport> {
    if min_level > max_level {
        return Err(Error::InvalidArgument(format!(
            "min level {min_level} exceeds max level {max_level}"
        )));
    }
    check_error_rule(&options.quad_error)?;
    let mut mesh = SurfaceMesh::octahedron_sphere(min_level)?;
    let mut outcomes = Vec::new();
    loop {
        let outcome = match run_level(spec, &mesh, options) {
            Ok(record) => LevelOutcome::Solved(record),
            Err(error) => LevelOutcome::Failed {
                info: LevelInfo::of(&mesh),
                error,
            },
        };
        outcomes.push(outcome);
        if mesh.level() == max_level {
            break;
        }
        mesh = mesh.refine();
    }
    Ok(ConvergenceReport {
        problem: spec.name.clone(),
        outcomes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfSupReport {
    pub level: u32,
    pub lambda: f64,
    /// Smallest generalized singular value of `S + λM` in the discrete `H1` norm.
    /// Equals the `γ̃` constant too, since the form is symmetric on `X_h = Y_h`.
    pub beta: f64,
}

/// Discrete inf-sup constant of `b_λ(u, v) = ∫ ∇u·∇v + λuv` on `H1 × H1`, by dense
/// eigen-decomposition of `N^{-1/2} K_λ N^{-1/2}` with `N = S + M`.
pub fn discrete_inf_sup(mesh: &SurfaceMesh, lambda: f64) -> Result<InfSupReport> {
    if mesh.level() > MAX_INF_SUP_LEVEL {
        return Err(Error::InvalidArgument(format!(
            "dense inf-sup estimate limited to level {MAX_INF_SUP_LEVEL}, got {}",
            mesh.level()
        )));
    }
    let s = assemble_stiffness(mesh)?;
    let m = assemble_mass(mesh, &QuadratureRule::edge_midpoints())?;
    let gram = SparseMatrix::linear_combination(1.0, &s, 1.0, &m)?.to_dense();
    let k = SparseMatrix::linear_combination(1.0, &s, lambda, &m)?.to_dense();
    let ev = linalg::generalized_eigenvalues(&k, &gram)?;
    // For symmetric K the singular values are |eigenvalues|.
    let beta = ev.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
    Ok(InfSupReport {
        level: mesh.level(),
        lambda,
        beta,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoercivityReport {
    pub level: u32,
    /// Smallest `μ` with `Q v = μ M v`, `Q = (K⁻¹M)ᵀ C (K⁻¹M) + M`. Signed, not clamped.
    pub mu_min: f64,
}

/// Smallest generalized eigenvalue of `c(G_h m(v,·), G_h m(v,·)) + m(v, v)` against
/// `m(v, v)` for an assembled system (dense).
pub fn coercivity_constant(system: &SaddleSystem<'_>) -> Result<f64> {
    let k = system.k.to_dense();
    let m = system.m.to_dense();
    let c = system.c.to_dense();
    let chol = Cholesky::new(k).ok_or_else(|| Error::Solver {
        message: "b-form matrix is not positive definite".into(),
        residual: None,
    })?;
    let g: DMatrix<f64> = chol.solve(&m);
    let q = g.transpose() * c * &g + &m;
    let ev = linalg::generalized_eigenvalues(&q, &m)?;
    Ok(ev[0])
}

pub fn discrete_coercivity_constant(
    spec: &ProblemSpec,
    mesh: &SurfaceMesh,
    quad: &QuadratureRule,
) -> Result<CoercivityReport> {
    if mesh.level() > MAX_COERCIVITY_LEVEL {
        return Err(Error::InvalidArgument(format!(
            "dense coercivity estimate limited to level {MAX_COERCIVITY_LEVEL}, got {}",
            mesh.level()
        )));
    }
    let system = build_system(spec, mesh, quad)?;
    Ok(CoercivityReport {
        level: mesh.level(),
        mu_min: coercivity_constant(&system)?,
    })
}

/// Smooth stand-ins for the supremum over `W^{1,r}` in the Ritz decay check.
pub fn ritz_sample_fields() -> Vec<ScalarField> {
    use crate::geometry::Vec3;
    vec![
        ScalarField::coordinate(0),
        ScalarField::coordinate(2),
        ScalarField::new("x1 x2", |x| x.x * x.y).with_gradient(|x| Vec3::new(x.y, x.x, 0.0)),
        ScalarField::new("x1 x2 x3", |x| x.x * x.y * x.z)
            .with_gradient(|x| Vec3::new(x.y * x.z, x.x * x.z, x.x * x.y)),
        ScalarField::new("exp(x3)", |x| x.z.exp()).with_gradient(|x| Vec3::new(0.0, 0.0, x.z.exp())),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RitzDecayEntry {
    pub level: u32,
    /// `max_ψ ||ψ∘p - Π_h ψ||_{L2(Γ_h)} / ||ψ∘p||_{H1(Γ_h)}` over the sample set.
    pub max_ratio: f64,
}

pub fn ritz_decay(
    meshes: &[SurfaceMesh],
    fields: &[ScalarField],
    quad_assembly: &QuadratureRule,
    quad_error: &QuadratureRule,
) -> Result<Vec<RitzDecayEntry>> {
    if meshes.len() < 2 {
        return Err(Error::InvalidArgument("Ritz decay needs at least two meshes".into()));
    }
    if fields.is_empty() {
        return Err(Error::InvalidArgument("Ritz decay needs at least one field".into()));
    }
    check_error_rule(quad_error)?;
    meshes
        .iter()
        .map(|mesh| {
            let solver = BFormSolver::new(mesh, 1.0, quad_assembly)?;
            let mut max_ratio: f64 = 0.0;
            for psi in fields {
                let proj = solver.ritz_project(psi, quad_error)?;
                let err = error_l2(mesh, &proj, psi, quad_error)?;
                let norm = h1_norm(mesh, psi, quad_error)?;
                max_ratio = max_ratio.max(err / norm);
            }
            Ok(RitzDecayEntry {
                level: mesh.level(),
                max_ratio,
            })
        })
        .collect()
}
