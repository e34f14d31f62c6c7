//! Symmetric quadrature rules on triangles in barycentric coordinates.
//!
//! Weights are normalised to sum to one, so a rule computes the mean value over
//! the triangle; multiply by the area to integrate.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    points: Vec<[f64; 3]>,
    weights: Vec<f64>,
    degree: u32,
}

/// The three cyclic permutations of `(a, b, b)`.
fn orbit3(a: f64, b: f64) -> [[f64; 3]; 3] {
    [[a, b, b], [b, a, b], [b, b, a]]
}

impl QuadratureRule {
    /// Degrees with a built-in rule.
    pub const SUPPORTED_DEGREES: [u32; 4] = [1, 2, 4, 5];

    pub fn by_degree(degree: u32) -> Result<Self> {
        match degree {
            1 => Ok(Self::centroid()),
            2 => Ok(Self::edge_midpoints()),
            4 => Ok(Self::dunavant6()),
            5 => Ok(Self::radon7()),
            _ => Err(Error::InvalidArgument(format!(
                "no triangle quadrature of degree {degree}; supported: {:?}",
                Self::SUPPORTED_DEGREES
            ))),
        }
    }

    pub fn centroid() -> Self {
        Self {
            points: vec![[1.0 / 3.0; 3]],
            weights: vec![1.0],
            degree: 1,
        }
    }

    /// Three edge midpoints, exact for quadratics. Default for assembly.
    pub fn edge_midpoints() -> Self {
        Self {
            points: vec![[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]],
            weights: vec![1.0 / 3.0; 3],
            degree: 2,
        }
    }

    /// Six interior points, degree 4 (Dunavant). Default for error integration.
    pub fn dunavant6() -> Self {
        let a = 0.445_948_490_915_964_886_32;
        let b = 0.091_576_213_509_770_743_46;
        let wa = 0.223_381_589_678_011_465_70;
        let wb = 0.109_951_743_655_321_867_64;
        let mut points = orbit3(1.0 - 2.0 * a, a).to_vec();
        points.extend(orbit3(1.0 - 2.0 * b, b));
        Self {
            points,
            weights: vec![wa, wa, wa, wb, wb, wb],
            degree: 4,
        }
    }

    /// Seven interior points, degree 5 (Radon).
    pub fn radon7() -> Self {
        let s = 15f64.sqrt();
        let a = (6.0 - s) / 21.0;
        let b = (6.0 + s) / 21.0;
        let wa = (155.0 - s) / 1200.0;
        let wb = (155.0 + s) / 1200.0;
        let mut points = vec![[1.0 / 3.0; 3]];
        points.extend(orbit3(1.0 - 2.0 * a, a));
        points.extend(orbit3(1.0 - 2.0 * b, b));
        Self {
            points,
            weights: vec![0.225, wa, wa, wa, wb, wb, wb],
            degree: 5,
        }
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// All barycentric coordinates strictly positive.
    pub fn is_interior(&self) -> bool {
        self.points.iter().all(|p| p.iter().all(|&l| l > 0.0))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64; 3], f64)> {
        self.points.iter().zip(self.weights.iter().copied())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    /// Mean of `l1^a l2^b l3^c` over a triangle: `2 a! b! c! / (a + b + c + 2)!`.
    fn exact_monomial_mean(a: u32, b: u32, c: u32) -> f64 {
        2.0 * factorial(a) * factorial(b) * factorial(c) / factorial(a + b + c + 2)
    }

    #[test]
    fn exactness_and_weights() {
        for degree in QuadratureRule::SUPPORTED_DEGREES {
            let rule = QuadratureRule::by_degree(degree).unwrap();
            assert!((rule.weights().iter().sum::<f64>() - 1.0).abs() <= 1e-14);
            for p in rule.points() {
                assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-15);
            }
            for a in 0..=degree {
                for b in 0..=degree - a {
                    let c = degree - a - b;
                    let q: f64 = rule
                        .iter()
                        .map(|(l, w)| w * l[0].powi(a as i32) * l[1].powi(b as i32) * l[2].powi(c as i32))
                        .sum();
                    let exact = exact_monomial_mean(a, b, c);
                    assert!((q - exact).abs() < 1e-14, "degree {degree}: ({a},{b},{c}) {q} vs {exact}");
                }
            }
        }
    }

    #[test]
    fn degree_is_sharp_for_midpoints() {
        let rule = QuadratureRule::edge_midpoints();
        let q: f64 = rule.iter().map(|(l, w)| w * l[0].powi(3)).sum();
        assert!((q - exact_monomial_mean(3, 0, 0)).abs() > 1e-3);
    }

    #[test]
    fn interior_flags() {
        assert!(!QuadratureRule::edge_midpoints().is_interior());
        assert!(QuadratureRule::dunavant6().is_interior());
        assert!(QuadratureRule::radon7().is_interior());
        assert!(QuadratureRule::centroid().is_interior());
        assert!(QuadratureRule::by_degree(3).is_err());
    }
}
