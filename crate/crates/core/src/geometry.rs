//! Exact-surface calculus on the unit sphere and the coefficient fields of the
//! two sphere experiments.
//!
//! Every field is extended off the sphere by composing with the closest-point
//! projection `p(x) = x / |x|`, so the extension is constant along normals. The
//! ambient gradient of such an extension at `x` is `J_p(x)^T grad g(p(x))` with
//! `J_p(x) = (I - x̂ x̂^T) / |x|`.

use std::f64::consts::{LN_2, PI};
use std::fmt;
use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::saddle::{FormKind, PointTerm, ProblemSpec};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

type ValueFn = dyn Fn(&Vec3) -> Result<f64> + Send + Sync;
type GradientFn = dyn Fn(&Vec3) -> Result<Vec3> + Send + Sync;
type MatrixFn = dyn Fn(&Vec3) -> Mat3 + Send + Sync;

/// Closed-form geometry of `S(0, 1)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct UnitSphere;

impl UnitSphere {
    /// Mean curvature as the sum of principal curvatures.
    pub const MEAN_CURVATURE: f64 = 2.0;

    pub fn project(x: &Vec3) -> Result<Vec3> {
        let r = x.norm();
        if r <= 1e-13 {
            return Err(Error::InvalidArgument(format!(
                "cannot project a point of norm {r:e} onto the sphere"
            )));
        }
        Ok(x / r)
    }

    pub fn signed_distance(x: &Vec3) -> f64 {
        x.norm() - 1.0
    }

    /// Outward unit normal at a point of the sphere.
    pub fn normal(p: &Vec3) -> Vec3 {
        *p
    }

    /// `P = I - ν ν^T`. Also the Weingarten map on the unit sphere.
    pub fn tangential_projector(p: &Vec3) -> Mat3 {
        Mat3::identity() - p * p.transpose()
    }

    /// Jacobian of `x ↦ x / |x|`; symmetric.
    pub fn projection_jacobian(x: &Vec3) -> Result<Mat3> {
        let p = Self::project(x)?;
        Ok(Self::tangential_projector(&p) / x.norm())
    }
}

pub fn project(x: &Vec3) -> Result<Vec3> {
    UnitSphere::project(x)
}

/// A scalar field on the sphere, optionally with a closed-form gradient.
///
/// `value` and `gradient` receive points on the sphere. The gradient closure may
/// return any ambient gradient of a formula that agrees with the field on the
/// sphere; only its tangential part is ever used.
#[derive(Clone)]
pub struct ScalarField {
    name: Arc<str>,
    value: Arc<ValueFn>,
    gradient: Option<Arc<GradientFn>>,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("name", &self.name)
            .field("has_gradient", &self.gradient.is_some())
            .finish()
    }
}

impl ScalarField {
    pub fn new(name: &str, value: impl Fn(&Vec3) -> f64 + Send + Sync + 'static) -> Self {
        Self::fallible(name, move |x| Ok(value(x)))
    }

    pub fn fallible(
        name: &str,
        value: impl Fn(&Vec3) -> Result<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            value: Arc::new(value),
            gradient: None,
        }
    }

    pub fn with_gradient(self, gradient: impl Fn(&Vec3) -> Vec3 + Send + Sync + 'static) -> Self {
        self.with_fallible_gradient(move |x| Ok(gradient(x)))
    }

    pub fn with_fallible_gradient(
        mut self,
        gradient: impl Fn(&Vec3) -> Result<Vec3> + Send + Sync + 'static,
    ) -> Self {
        self.gradient = Some(Arc::new(gradient));
        self
    }

    pub fn constant(c: f64) -> Self {
        Self::new(&format!("{c}"), move |_| c).with_gradient(|_| Vec3::zeros())
    }

    /// The coordinate function `x_{axis+1}`.
    pub fn coordinate(axis: usize) -> Self {
        assert!(axis < 3, "coordinate axis {axis} out of range");
        let mut e = Vec3::zeros();
        e[axis] = 1.0;
        Self::new(&format!("x{}", axis + 1), move |x| x[axis]).with_gradient(move |_| e)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn has_gradient(&self) -> bool {
        self.gradient.is_some()
    }

    /// Value of the normal-constant extension at any nonzero `x`.
    pub fn evaluate(&self, x: &Vec3) -> Result<f64> {
        (self.value)(&project(x)?)
    }

    /// Gradient of the normal-constant extension at any nonzero `x`.
    pub fn ambient_gradient(&self, x: &Vec3) -> Result<Vec3> {
        let grad = self.gradient.as_ref().ok_or_else(|| {
            Error::InvalidArgument(format!("field `{}` has no gradient", self.name))
        })?;
        let p = project(x)?;
        Ok(UnitSphere::tangential_projector(&p) * grad(&p)? / x.norm())
    }

    /// Tangential gradient at a point of the sphere.
    pub fn surface_gradient(&self, p: &Vec3) -> Result<Vec3> {
        self.ambient_gradient(p)
    }

    /// Pointwise linear combination. The gradient is kept only when both sides have one.
    pub fn linear_combination(a: f64, f: &ScalarField, b: f64, g: &ScalarField) -> Self {
        let (fv, gv) = (f.value.clone(), g.value.clone());
        let name = format!("{a}*{} + {b}*{}", f.name, g.name);
        let mut out = Self::fallible(&name, move |x| Ok(a * fv(x)? + b * gv(x)?));
        if let (Some(fg), Some(gg)) = (f.gradient.clone(), g.gradient.clone()) {
            out = out.with_fallible_gradient(move |x| Ok(a * fg(x)? + b * gg(x)?));
        }
        out
    }
}

/// `∇_Γ f (x) = (I - x x^T) ∇f̄(x)` for `x` on the sphere.
pub fn tangential_gradient(f: &ScalarField, x: &Vec3) -> Result<Vec3> {
    if (x.norm() - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "tangential gradient needs a point on the unit sphere, |x| = {}",
            x.norm()
        )));
    }
    Ok(UnitSphere::tangential_projector(x) * f.ambient_gradient(x)?)
}

/// A symmetric 3x3 matrix-valued field, evaluated at points of the sphere.
#[derive(Clone)]
pub struct MatrixField {
    name: Arc<str>,
    value: Arc<MatrixFn>,
}

impl fmt::Debug for MatrixField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MatrixField").field("name", &self.name).finish()
    }
}

impl MatrixField {
    pub fn new(name: &str, value: impl Fn(&Vec3) -> Mat3 + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            value: Arc::new(value),
        }
    }

    pub fn identity() -> Self {
        Self::new("1", |_| Mat3::identity())
    }

    pub fn zero() -> Self {
        Self::new("0", |_| Mat3::zeros())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn evaluate(&self, p: &Vec3) -> Mat3 {
        (self.value)(p)
    }

    /// `P A P - shift * I`, the coefficient of the gradient part of the standard form.
    pub fn projected_minus_identity(&self, shift: f64) -> Self {
        let inner = self.value.clone();
        let name = format!("P {} P - {shift}", self.name);
        Self::new(&name, move |p| {
            let proj = UnitSphere::tangential_projector(p);
            proj * inner(p) * proj - Mat3::identity() * shift
        })
    }
}

fn singular_guard(field: &str, p: &Vec3) -> Result<()> {
    if p.z >= 1.0 - 1e-14 {
        Err(Error::SingularPoint {
            field: field.to_owned(),
            x3: p.z,
        })
    } else {
        Ok(())
    }
}

/// `(1 - x3) log(1 - x3) + 1/2 - log 2`, the profile shared by `u` and `g` of the
/// point-force problem.
fn log_profile(p: &Vec3) -> f64 {
    let s = 1.0 - p.z;
    s * s.ln() + 0.5 - LN_2
}

/// Smooth test problem: `u = x3`, `w = x1 x2` with `B = diag(x)` and `C = 2 + x1 x2`.
pub fn smooth_problem_fields() -> ProblemSpec {
    let b = MatrixField::new("diag(x)", Mat3::from_diagonal);
    let c = ScalarField::new("2 + x1 x2", |x| 2.0 + x.x * x.y)
        .with_gradient(|x| Vec3::new(x.y, x.x, 0.0));
    let f = ScalarField::new("F", |x| {
        let (x1, x2, x3) = (x.x, x.y, x.z);
        -5.0 * x3 * (x1.powi(3) + x2.powi(3) + x3.powi(3)) + 2.0 * x3 * (x1 + x2 + x3) - 4.0 * x3
            + 4.0 * x3 * x3
            - 1.0
            + (1.0 + x1 * x2) * x3
            + 7.0 * x1 * x2
    });
    let g = ScalarField::new("G", |x| 3.0 * x.z - x.x * x.y)
        .with_gradient(|x| Vec3::new(-x.y, -x.x, 3.0));
    let u = ScalarField::new("x3", |x| x.z).with_gradient(|_| Vec3::z());
    let w = ScalarField::new("x1 x2", |x| x.x * x.y).with_gradient(|x| Vec3::new(x.y, x.x, 0.0));
    ProblemSpec {
        name: "smooth".into(),
        form: FormKind::Standard { b, c },
        f,
        f_points: Vec::new(),
        g,
        exact_u: u,
        exact_w: w,
        lambda: 1.0,
    }
}

/// Point-force problem with a delta at the north pole; `w` has a logarithmic
/// singularity there, so its gradient is not provided.
pub fn delta_problem_fields() -> ProblemSpec {
    let f = ScalarField::new("-(1 + 3 x3) / 4pi", |x| -(1.0 + 3.0 * x.z) / (4.0 * PI))
        .with_gradient(|_| Vec3::new(0.0, 0.0, -3.0 / (4.0 * PI)));
    let g = ScalarField::fallible("3/8pi log profile", |x| {
        singular_guard("g", x)?;
        Ok(3.0 / (8.0 * PI) * log_profile(x))
    });
    let u = ScalarField::fallible("u", |x| {
        singular_guard("u", x)?;
        Ok(log_profile(x) / (8.0 * PI))
    })
    .with_fallible_gradient(|x| {
        singular_guard("u", x)?;
        Ok(Vec3::new(0.0, 0.0, -((1.0 - x.z).ln() + 1.0) / (8.0 * PI)))
    });
    let w = ScalarField::fallible("w", |x| {
        singular_guard("w", x)?;
        Ok(-((1.0 - x.z).ln() - LN_2 + 1.0 + 1.5 * x.z) / (4.0 * PI))
    });
    ProblemSpec {
        name: "delta".into(),
        form: FormKind::Delta,
        f,
        f_points: vec![PointTerm {
            location: Vec3::z(),
            weight: 1.0,
        }],
        g,
        exact_u: u,
        exact_w: w,
        lambda: 1.0,
    }
}
