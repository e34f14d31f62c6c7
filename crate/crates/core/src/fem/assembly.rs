//! Global assembly of P1 forms and load vectors.
//!
//! Element contributions are computed in parallel and scattered into the global
//! structure sequentially in element order, so the result does not depend on the
//! number of worker threads. Local matrices are built from their upper triangle,
//! which makes symmetric forms bitwise symmetric.

use rayon::prelude::*;

use super::{Element, QuadratureRule, SparseMatrix, SurfaceFunction};
use crate::error::{Error, Result};
use crate::geometry::{MatrixField, ScalarField};
use crate::mesh::SurfaceMesh;

/// Triangles with smaller area are rejected.
pub const DEGENERATE_AREA: f64 = 1e-16;

type Local = [[f64; 3]; 3];

fn symmetric_local(mut entry: impl FnMut(usize, usize) -> Result<f64>) -> Result<Local> {
    let mut local = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in i..3 {
            let v = entry(i, j)?;
            local[i][j] = v;
            local[j][i] = v;
        }
    }
    Ok(local)
}

fn vertex_pattern(mesh: &SurfaceMesh) -> Vec<Vec<usize>> {
    let mut pattern: Vec<Vec<usize>> = (0..mesh.num_vertices()).map(|i| vec![i]).collect();
    for t in mesh.triangles() {
        for &a in t {
            pattern[a].extend(t.iter().copied().filter(|&b| b != a));
        }
    }
    for row in &mut pattern {
        row.sort_unstable();
        row.dedup();
    }
    pattern
}

fn assemble_symmetric(
    mesh: &SurfaceMesh,
    local: impl Fn(usize, &Element) -> Result<Local> + Sync,
) -> Result<SparseMatrix> {
    let locals: Vec<Local> = (0..mesh.num_triangles())
        .into_par_iter()
        .map(|t| local(t, &Element::of(mesh, t)?))
        .collect::<Result<_>>()?;
    let mut matrix = SparseMatrix::zeros_with_pattern(mesh.num_vertices(), &vertex_pattern(mesh));
    for (tri, loc) in mesh.triangles().iter().zip(&locals) {
        for i in 0..3 {
            for j in 0..3 {
                matrix.add_to(tri[i], tri[j], loc[i][j]);
            }
        }
    }
    matrix.flag_symmetric(0.0)?;
    Ok(matrix)
}

fn assemble_vector(
    mesh: &SurfaceMesh,
    local: impl Fn(usize, &Element) -> Result<[f64; 3]> + Sync,
) -> Result<Vec<f64>> {
    let locals: Vec<[f64; 3]> = (0..mesh.num_triangles())
        .into_par_iter()
        .map(|t| local(t, &Element::of(mesh, t)?))
        .collect::<Result<_>>()?;
    let mut out = vec![0.0; mesh.num_vertices()];
    for (tri, loc) in mesh.triangles().iter().zip(&locals) {
        for k in 0..3 {
            out[tri[k]] += loc[k];
        }
    }
    Ok(out)
}

fn require_degree(quad: &QuadratureRule, min: u32, what: &str) -> Result<()> {
    if quad.degree() < min {
        return Err(Error::InvalidArgument(format!(
            "{what} needs a quadrature of degree >= {min}, got {}",
            quad.degree()
        )));
    }
    Ok(())
}

/// `M_ij = ∫_{Γ_h} φ_i φ_j`.
pub fn assemble_mass(mesh: &SurfaceMesh, quad: &QuadratureRule) -> Result<SparseMatrix> {
    assemble_weighted_mass(mesh, &ScalarField::constant(1.0), quad)
}

/// `S_ij = ∫_{Γ_h} ∇φ_i · ∇φ_j`, integrated exactly.
pub fn assemble_stiffness(mesh: &SurfaceMesh) -> Result<SparseMatrix> {
    assemble_symmetric(mesh, |_, e| {
        symmetric_local(|i, j| Ok(e.area * e.basis_gradients[i].dot(&e.basis_gradients[j])))
    })
}

/// `∫_{Γ_h} ∇φ_i · A(p(x)) ∇φ_j`.
pub fn assemble_weighted_gradient_form(
    mesh: &SurfaceMesh,
    coefficient: &MatrixField,
    quad: &QuadratureRule,
) -> Result<SparseMatrix> {
    require_degree(quad, 2, "weighted gradient form")?;
    assemble_symmetric(mesh, |_, e| {
        let mut mean = nalgebra::Matrix3::zeros();
        for (bary, w) in quad.iter() {
            let p = crate::geometry::project(&e.point(bary))?;
            mean += coefficient.evaluate(&p) * w;
        }
        symmetric_local(|i, j| Ok(e.area * e.basis_gradients[i].dot(&(mean * e.basis_gradients[j]))))
    })
}

/// `∫_{Γ_h} c(p(x)) φ_i φ_j`.
pub fn assemble_weighted_mass(
    mesh: &SurfaceMesh,
    coefficient: &ScalarField,
    quad: &QuadratureRule,
) -> Result<SparseMatrix> {
    require_degree(quad, 2, "mass matrix")?;
    assemble_symmetric(mesh, |_, e| {
        let samples = quad
            .iter()
            .map(|(bary, w)| Ok((bary, w * coefficient.evaluate(&e.point(bary))?)))
            .collect::<Result<Vec<_>>>()?;
        symmetric_local(|i, j| Ok(e.area * samples.iter().map(|(l, cw)| cw * l[i] * l[j]).sum::<f64>()))
    })
}

/// `∫_{Γ_h} f(p(x)) φ_i`.
pub fn assemble_load(mesh: &SurfaceMesh, f: &ScalarField, quad: &QuadratureRule) -> Result<Vec<f64>> {
    assemble_vector(mesh, |_, e| {
        let mut local = [0.0; 3];
        for (bary, w) in quad.iter() {
            let v = w * f.evaluate(&e.point(bary))?;
            for k in 0..3 {
                local[k] += v * bary[k];
            }
        }
        Ok(local.map(|v| v * e.area))
    })
}

/// `∫_{Γ_h} ∇_{Γ_h} φ · ∇φ_i + λ φ φ_i` for any sampled function `φ`; the right-hand
/// side of the Ritz projection.
pub fn assemble_b_load(
    mesh: &SurfaceMesh,
    phi: &impl SurfaceFunction,
    lambda: f64,
    quad: &QuadratureRule,
) -> Result<Vec<f64>> {
    assemble_vector(mesh, |t, e| {
        let mut local = [0.0; 3];
        for (bary, w) in quad.iter() {
            let v = phi.value(t, e, bary)?;
            let g = phi.gradient(t, e, bary)?;
            for k in 0..3 {
                local[k] += w * (g.dot(&e.basis_gradients[k]) + lambda * v * bary[k]);
            }
        }
        Ok(local.map(|v| v * e.area))
    })
}

/// Nodal evaluation functional at `vertex`, scaled by `weight`.
pub fn assemble_point_load(mesh: &SurfaceMesh, vertex: usize, weight: f64) -> Result<Vec<f64>> {
    if vertex >= mesh.num_vertices() {
        return Err(Error::InvalidArgument(format!(
            "vertex {vertex} out of range for a mesh with {} vertices",
            mesh.num_vertices()
        )));
    }
    let mut out = vec![0.0; mesh.num_vertices()];
    out[vertex] = weight;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::FEFunction;
    use crate::geometry::smooth_problem_fields;
    use crate::mesh::NORTH_POLE;
    use crate::saddle::FormKind;
    use nalgebra::{Cholesky, SymmetricEigen};
    use std::f64::consts::PI;

    fn mesh(level: u32) -> SurfaceMesh {
        SurfaceMesh::octahedron_sphere(level).unwrap()
    }

    fn quad2() -> QuadratureRule {
        QuadratureRule::edge_midpoints()
    }

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn mass_totals_area() {
        let m0 = assemble_mass(&mesh(0), &quad2()).unwrap();
        assert!((m0.sum() - 4.0 * 3f64.sqrt()).abs() < 1e-12);
        assert_eq!(m0.max_asymmetry(), 0.0);
        let m5 = assemble_mass(&mesh(5), &quad2()).unwrap();
        assert!(m5.sum() > 12.50 && m5.sum() < 4.0 * PI);
    }

    #[test]
    fn mass_is_spd() {
        for level in 0..=3 {
            let m = assemble_mass(&mesh(level), &quad2()).unwrap();
            assert!(Cholesky::new(m.to_dense()).is_some());
        }
    }

    #[test]
    fn mass_rejects_low_degree() {
        assert!(assemble_mass(&mesh(0), &QuadratureRule::centroid()).is_err());
    }

    #[test]
    fn stiffness_row_sums_vanish() {
        let s = assemble_stiffness(&mesh(4)).unwrap();
        assert!(s.row_sums().iter().all(|r| r.abs() < 1e-12));
        assert_eq!(s.max_asymmetry(), 0.0);
    }

    #[test]
    fn stiffness_kernel_is_constants() {
        for level in 0..=2 {
            let s = assemble_stiffness(&mesh(level)).unwrap().to_dense();
            let mut ev: Vec<f64> = SymmetricEigen::new(s).eigenvalues.iter().copied().collect();
            ev.sort_by(f64::total_cmp);
            assert!(ev[0].abs() < 1e-12, "level {level}: {}", ev[0]);
            assert!(ev[1] > 1e-3, "level {level}: {}", ev[1]);
        }
    }

    /// `∫ ∇_Γ x3 · ∇_Γ x3 = 2 ∫ x3^2`, approximated on the interpolant.
    #[test]
    fn eigenfunction_ratio() {
        let mut prev_gap = f64::INFINITY;
        for level in 2..=5 {
            let m = mesh(level);
            let s = assemble_stiffness(&m).unwrap();
            let mm = assemble_mass(&m, &quad2()).unwrap();
            let x3 = FEFunction::interpolate(&m, &ScalarField::coordinate(2)).unwrap();
            let c = x3.coefficients();
            let ratio = s.bilinear(c, c) / mm.bilinear(c, c);
            let gap = (ratio - 2.0).abs();
            assert!(gap < prev_gap);
            prev_gap = gap;
            if level == 5 {
                assert!(gap < 0.02, "ratio {ratio}");
            }
        }
    }

    #[test]
    fn weighted_forms_reduce_to_plain_ones() {
        let m = mesh(2);
        let s = assemble_stiffness(&m).unwrap();
        let id = assemble_weighted_gradient_form(&m, &MatrixField::identity(), &quad2()).unwrap();
        let diff = SparseMatrix::linear_combination(1.0, &s, -1.0, &id).unwrap();
        assert!(diff.max_abs() < 1e-12);
        let zero = assemble_weighted_gradient_form(&m, &MatrixField::zero(), &quad2()).unwrap();
        assert_eq!(zero.max_abs(), 0.0);

        let mass = assemble_mass(&m, &quad2()).unwrap();
        let one = assemble_weighted_mass(&m, &ScalarField::constant(1.0), &quad2()).unwrap();
        assert!(SparseMatrix::linear_combination(1.0, &mass, -1.0, &one).unwrap().max_abs() < 1e-12);
        let z = assemble_weighted_mass(&m, &ScalarField::constant(0.0), &quad2()).unwrap();
        assert_eq!(z.max_abs(), 0.0);
    }

    #[test]
    fn smooth_coefficients_definiteness() {
        let m = mesh(2);
        let spec = smooth_problem_fields();
        let FormKind::Standard { b, c } = &spec.form else { unreachable!() };
        let a = assemble_weighted_gradient_form(&m, &b.projected_minus_identity(2.0), &quad2()).unwrap();
        assert_eq!(a.max_asymmetry(), 0.0);
        // P B P - 2 is below -1 on tangent vectors, so the form is -S-like: no positive
        // eigenvalues beyond round-off and a one-dimensional kernel (constants).
        let mut ev: Vec<f64> = SymmetricEigen::new(a.to_dense()).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        assert!(ev[0] < -1e-2);
        assert!(ev[ev.len() - 1].abs() < 1e-12);
        assert!(ev[ev.len() - 2] < -1e-3);

        let cm1 = ScalarField::linear_combination(1.0, c, -1.0, &ScalarField::constant(1.0));
        let wm = assemble_weighted_mass(&m, &cm1, &quad2()).unwrap();
        assert!(Cholesky::new(wm.to_dense()).is_some());
    }

    #[test]
    fn loads() {
        let m = mesh(3);
        let q4 = QuadratureRule::dunavant6();
        let one = assemble_load(&m, &ScalarField::constant(1.0), &quad2()).unwrap();
        assert!((one.iter().sum::<f64>() - m.total_area()).abs() < 1e-12);
        let x3 = assemble_load(&m, &ScalarField::coordinate(2), &quad2()).unwrap();
        assert!(x3.iter().sum::<f64>().abs() < 1e-12);

        let spec = smooth_problem_fields();
        let g = assemble_load(&m, &spec.g, &q4).unwrap();
        let mut direct = 0.0;
        for t in 0..m.num_triangles() {
            let e = Element::of(&m, t).unwrap();
            for (bary, w) in q4.iter() {
                direct += e.area * w * spec.g.evaluate(&e.point(bary)).unwrap();
            }
        }
        assert!((dot(&g, &vec![1.0; g.len()]) - direct).abs() < 1e-12);
    }

    #[test]
    fn point_loads() {
        let m = mesh(2);
        let e = assemble_point_load(&m, NORTH_POLE, 1.0).unwrap();
        assert_eq!(e.iter().sum::<f64>(), 1.0);
        assert_eq!(e[NORTH_POLE], 1.0);
        assert!(assemble_point_load(&m, NORTH_POLE, 0.0).unwrap().iter().all(|&v| v == 0.0));
        let x3 = FEFunction::interpolate(&m, &ScalarField::coordinate(2)).unwrap();
        assert_eq!(dot(&e, x3.coefficients()), 1.0);
        assert!(assemble_point_load(&m, m.num_vertices(), 1.0).is_err());
    }

    #[test]
    fn h1_gram_is_spd_and_conditioning_grows() {
        let mut prev = 0.0;
        for level in 0..=3 {
            let m = mesh(level);
            let k = SparseMatrix::linear_combination(
                1.0,
                &assemble_stiffness(&m).unwrap(),
                1.0,
                &assemble_mass(&m, &quad2()).unwrap(),
            )
            .unwrap();
            let ev = SymmetricEigen::new(k.to_dense()).eigenvalues;
            let cond = ev.max() / ev.min();
            assert!(ev.min() > 0.0);
            assert!(cond > prev);
            prev = cond;
        }
    }

    #[test]
    fn assembly_independent_of_thread_count() {
        let m = mesh(4);
        let spec = smooth_problem_fields();
        let FormKind::Standard { b, .. } = &spec.form else { unreachable!() };
        let a = b.projected_minus_identity(2.0);
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| {
                    (
                        assemble_weighted_gradient_form(&m, &a, &quad2()).unwrap(),
                        assemble_load(&m, &spec.f, &quad2()).unwrap(),
                    )
                })
        };
        assert_eq!(run(1), run(4));
    }
}
