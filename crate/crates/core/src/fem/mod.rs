//! Piecewise linear Lagrange elements on the polyhedral surface `Γ_h`.

mod assembly;
pub mod quadrature;
pub mod sparse;

pub use assembly::{
    assemble_b_load, assemble_load, assemble_mass, assemble_point_load, assemble_stiffness,
    assemble_weighted_gradient_form, assemble_weighted_mass, DEGENERATE_AREA,
};
pub use quadrature::QuadratureRule;
pub use sparse::SparseMatrix;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::geometry::{Mat3, ScalarField, Vec3};
use crate::mesh::SurfaceMesh;

/// Flat triangle data: corners, area, unit normal and the (constant) gradients of
/// the three barycentric coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Element {
    pub corners: [Vec3; 3],
    pub area: f64,
    pub normal: Vec3,
    pub basis_gradients: [Vec3; 3],
}

impl Element {
    pub fn of(mesh: &SurfaceMesh, t: usize) -> Result<Self> {
        let [a, b, c] = mesh.triangles()[t];
        let v = mesh.vertices();
        let corners = [v[a], v[b], v[c]];
        let n = (corners[1] - corners[0]).cross(&(corners[2] - corners[0]));
        let area = 0.5 * n.norm();
        if !(area >= DEGENERATE_AREA) {
            return Err(Error::DegenerateTriangle { triangle: t, area });
        }
        let normal = n / (2.0 * area);
        // grad λ_k = ν × (x_{k+2} - x_{k+1}) / 2|T|
        let grad = |k: usize| normal.cross(&(corners[(k + 2) % 3] - corners[(k + 1) % 3])) / (2.0 * area);
        Ok(Self {
            corners,
            area,
            normal,
            basis_gradients: [grad(0), grad(1), grad(2)],
        })
    }

    pub fn point(&self, bary: &[f64; 3]) -> Vec3 {
        self.corners[0] * bary[0] + self.corners[1] * bary[1] + self.corners[2] * bary[2]
    }

    /// `P_h = I - ν_h ν_h^T`.
    pub fn tangential_projector(&self) -> Mat3 {
        Mat3::identity() - self.normal * self.normal.transpose()
    }
}

/// Something that can be sampled, with its `Γ_h` tangential gradient, at points
/// of the flat triangles.
pub trait SurfaceFunction: Sync {
    fn value(&self, t: usize, element: &Element, bary: &[f64; 3]) -> Result<f64>;
    fn gradient(&self, t: usize, element: &Element, bary: &[f64; 3]) -> Result<Vec3>;
}

/// A field on `Γ` is sampled on `Γ_h` through its pullback `f ∘ p`.
impl SurfaceFunction for ScalarField {
    fn value(&self, _t: usize, element: &Element, bary: &[f64; 3]) -> Result<f64> {
        self.evaluate(&element.point(bary))
    }

    fn gradient(&self, _t: usize, element: &Element, bary: &[f64; 3]) -> Result<Vec3> {
        let x = element.point(bary);
        Ok(element.tangential_projector() * self.ambient_gradient(&x)?)
    }
}

/// Coefficients of a P1 function over the vertices of a mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct FEFunction<'m> {
    mesh: &'m SurfaceMesh,
    coefficients: Vec<f64>,
}

impl<'m> FEFunction<'m> {
    pub fn new(mesh: &'m SurfaceMesh, coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() != mesh.num_vertices() {
            return Err(Error::InvalidArgument(format!(
                "{} coefficients for a mesh with {} vertices",
                coefficients.len(),
                mesh.num_vertices()
            )));
        }
        Ok(Self { mesh, coefficients })
    }

    pub fn zeros(mesh: &'m SurfaceMesh) -> Self {
        Self {
            mesh,
            coefficients: vec![0.0; mesh.num_vertices()],
        }
    }

    /// Nodal interpolant `I_h f = Σ f(q_i) φ_i`.
    pub fn interpolate(mesh: &'m SurfaceMesh, field: &ScalarField) -> Result<Self> {
        let coefficients = mesh
            .vertices()
            .iter()
            .map(|q| field.evaluate(q))
            .collect::<Result<_>>()?;
        Ok(Self { mesh, coefficients })
    }

    pub fn mesh(&self) -> &'m SurfaceMesh {
        self.mesh
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn into_coefficients(self) -> Vec<f64> {
        self.coefficients
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }
}

impl SurfaceFunction for FEFunction<'_> {
    fn value(&self, t: usize, _element: &Element, bary: &[f64; 3]) -> Result<f64> {
        let tri = self.mesh.triangles()[t];
        Ok((0..3).map(|k| bary[k] * self.coefficients[tri[k]]).sum())
    }

    fn gradient(&self, t: usize, element: &Element, _bary: &[f64; 3]) -> Result<Vec3> {
        let tri = self.mesh.triangles()[t];
        Ok((0..3).fold(Vector3::zeros(), |g, k| {
            g + element.basis_gradients[k] * self.coefficients[tri[k]]
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_gradients_are_dual_to_edges() {
        let mesh = SurfaceMesh::octahedron_sphere(2).unwrap();
        for t in 0..mesh.num_triangles() {
            let e = Element::of(&mesh, t).unwrap();
            for i in 0..3 {
                assert!(e.basis_gradients[i].dot(&e.normal).abs() < 1e-14);
                for j in 0..3 {
                    // λ_i(x_j) - λ_i(x_0) = grad λ_i · (x_j - x_0)
                    let expected = f64::from(u8::from(i == j)) - f64::from(u8::from(i == 0));
                    let got = e.basis_gradients[i].dot(&(e.corners[j] - e.corners[0]));
                    assert!((got - expected).abs() < 1e-13);
                }
            }
            let sum = e.basis_gradients.iter().sum::<Vec3>();
            assert!(sum.norm() < 1e-13);
        }
    }

    #[test]
    fn fe_function_length_checked() {
        let mesh = SurfaceMesh::octahedron_sphere(0).unwrap();
        assert!(FEFunction::new(&mesh, vec![0.0; 5]).is_err());
        let f = FEFunction::interpolate(&mesh, &ScalarField::coordinate(2)).unwrap();
        assert_eq!(f.coefficients(), &[0.0, 0.0, 0.0, 0.0, 1.0, -1.0]);
    }

    #[test]
    fn p1_sampling_is_affine() {
        let mesh = SurfaceMesh::octahedron_sphere(1).unwrap();
        let f = FEFunction::interpolate(&mesh, &ScalarField::coordinate(0)).unwrap();
        let e = Element::of(&mesh, 3).unwrap();
        let bary = [0.2, 0.3, 0.5];
        // A P1 function agrees with x1 at the vertices, hence on the flat triangle.
        let v = f.value(3, &e, &bary).unwrap();
        assert!((v - e.point(&bary).x).abs() < 1e-15);
        let g = f.gradient(3, &e, &bary).unwrap();
        assert!((g - e.tangential_projector() * Vec3::x()).norm() < 1e-13);
    }
}
