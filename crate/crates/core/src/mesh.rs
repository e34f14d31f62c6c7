//! Triangulations of the unit sphere.
//!
//! Meshes are built from the regular octahedron by repeated edge-midpoint
//! subdivision, with every new vertex pushed radially onto the sphere. The
//! vertex ordering is canonical: the six octahedron vertices come first in
//! the order `+x, -x, +y, -y, +z, -z`, followed by midpoints in the order their
//! edges are first visited. Point loads and golden tests rely on this.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::Vector3;

use crate::error::{Error, Result};

/// Refinement levels above this are refused (level 10 already has ~4M vertices).
pub const MAX_LEVEL: u32 = 10;

/// Index of `(0, 0, 1)` in the canonical ordering, valid at every level.
pub const NORTH_POLE: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceMesh {
    vertices: Vec<Vector3<f64>>,
    triangles: Vec<[usize; 3]>,
    level: u32,
}

impl SurfaceMesh {
    /// Octahedron refined `level` times.
    pub fn octahedron_sphere(level: u32) -> Result<Self> {
        if level > MAX_LEVEL {
            return Err(Error::InvalidArgument(format!(
                "refinement level {level} exceeds the maximum of {MAX_LEVEL}"
            )));
        }
        let mut mesh = Self::octahedron();
        for _ in 0..level {
            mesh = mesh.refine();
        }
        Ok(mesh)
    }

    fn octahedron() -> Self {
        let vertices = vec![
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(-1.0, 0.0, 0.0),
            Vector3::new(0.0, 1.0, 0.0),
            Vector3::new(0.0, -1.0, 0.0),
            Vector3::new(0.0, 0.0, 1.0),
            Vector3::new(0.0, 0.0, -1.0),
        ];
        let mut triangles = Vec::with_capacity(8);
        for &(sz, z) in &[(1.0, 4), (-1.0, 5)] {
            for &(sy, y) in &[(1.0, 2), (-1.0, 3)] {
                for &(sx, x) in &[(1.0, 0), (-1.0, 1)] {
                    // (x, y, z) is counterclockwise from outside in octants with an even
                    // number of negative signs.
                    if sx * sy * sz > 0.0 {
                        triangles.push([x, y, z]);
                    } else {
                        triangles.push([x, z, y]);
                    }
                }
            }
        }
        Self {
            vertices,
            triangles,
            level: 0,
        }
    }

    /// One step of midpoint subdivision. Existing vertices keep their indices and
    /// their exact coordinates.
    pub fn refine(&self) -> Self {
        let mut vertices = self.vertices.clone();
        vertices.reserve(self.triangles.len() * 3 / 2);
        let mut midpoints: HashMap<(usize, usize), usize> =
            HashMap::with_capacity(self.triangles.len() * 3 / 2);
        let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Vector3<f64>>| -> usize {
            let key = (a.min(b), a.max(b));
            *midpoints.entry(key).or_insert_with(|| {
                let m = (vertices[a] + vertices[b]).normalize();
                vertices.push(m);
                vertices.len() - 1
            })
        };

        let mut triangles = Vec::with_capacity(self.triangles.len() * 4);
        for &[a, b, c] in &self.triangles {
            let ab = midpoint(a, b, &mut vertices);
            let bc = midpoint(b, c, &mut vertices);
            let ca = midpoint(c, a, &mut vertices);
            triangles.push([a, ab, ca]);
            triangles.push([ab, b, bc]);
            triangles.push([ca, bc, c]);
            triangles.push([ab, bc, ca]);
        }
        Self {
            vertices,
            triangles,
            level: self.level + 1,
        }
    }

    pub fn vertices(&self) -> &[Vector3<f64>] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Undirected edges as sorted index pairs, in first-visit order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut seen = HashMap::with_capacity(self.triangles.len() * 3 / 2);
        let mut edges = Vec::with_capacity(self.triangles.len() * 3 / 2);
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                if seen.insert(key, ()).is_none() {
                    edges.push(key);
                }
            }
        }
        edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges().len()
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.num_vertices() as i64 - self.num_edges() as i64 + self.num_triangles() as i64
    }

    /// `sqrt(2) / 2^level`: the octahedron edge length halved once per refinement.
    pub fn nominal_h(&self) -> f64 {
        std::f64::consts::SQRT_2 / f64::powi(2.0, self.level as i32)
    }

    /// Largest Euclidean edge length.
    pub fn measured_h(&self) -> f64 {
        self.triangles
            .iter()
            .flat_map(|t| (0..3).map(move |k| (t[k], t[(k + 1) % 3])))
            .map(|(a, b)| (self.vertices[a] - self.vertices[b]).norm())
            .fold(0.0, f64::max)
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        0.5 * (pb - pa).cross(&(pc - pa)).norm()
    }

    /// Area of the polyhedral surface.
    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Index of the unique vertex within `tol` of `point`.
    pub fn vertex_at(&self, point: &Vector3<f64>, tol: f64) -> Result<usize> {
        if !(tol > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "vertex search tolerance must be positive, got {tol}"
            )));
        }
        let mut hits = self
            .vertices
            .iter()
            .enumerate()
            .filter(|(_, v)| (*v - point).norm() <= tol)
            .map(|(i, _)| i);
        let p = [point.x, point.y, point.z];
        match (hits.next(), hits.count()) {
            (None, _) => Err(Error::NotFound { point: p, tol }),
            (Some(i), 0) => Ok(i),
            (Some(_), rest) => Err(Error::Ambiguous {
                point: p,
                tol,
                count: rest + 1,
            }),
        }
    }

    /// Writes the mesh as ASCII OFF.
    pub fn export_off(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_off_string())?;
        Ok(())
    }

    pub fn to_off_string(&self) -> String {
        let mut out = String::with_capacity(64 * (self.vertices.len() + self.triangles.len()));
        out.push_str("OFF\n");
        let _ = writeln!(
            out,
            "{} {} {}",
            self.vertices.len(),
            self.triangles.len(),
            self.num_edges()
        );
        for v in &self.vertices {
            let _ = writeln!(out, "{:?} {:?} {:?}", v.x, v.y, v.z);
        }
        for [a, b, c] in &self.triangles {
            let _ = writeln!(out, "3 {a} {b} {c}");
        }
        out
    }

    /// Reads an OFF file written by [`SurfaceMesh::export_off`]. The level is not
    /// stored in the file and must be supplied.
    pub fn import_off(path: impl AsRef<Path>, level: u32) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::parse_off(&text, level)
    }

    pub fn parse_off(text: &str, level: u32) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        if lines.next() != Some("OFF") {
            return Err(Error::Parse("missing OFF header".into()));
        }
        let counts: Vec<usize> = lines
            .next()
            .ok_or_else(|| Error::Parse("missing counts line".into()))?
            .split_whitespace()
            .map(|s| s.parse().map_err(|_| Error::Parse(format!("bad count `{s}`"))))
            .collect::<Result<_>>()?;
        if counts.len() < 2 {
            return Err(Error::Parse("counts line needs vertex and face counts".into()));
        }
        let (nv, nf) = (counts[0], counts[1]);

        let parse_f64 = |s: &str| s.parse::<f64>().map_err(|_| Error::Parse(format!("bad coordinate `{s}`")));
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let line = lines.next().ok_or_else(|| Error::Parse("truncated vertex list".into()))?;
            let xyz: Vec<f64> = line.split_whitespace().map(parse_f64).collect::<Result<_>>()?;
            if xyz.len() != 3 {
                return Err(Error::Parse(format!("vertex line `{line}` needs 3 coordinates")));
            }
            vertices.push(Vector3::new(xyz[0], xyz[1], xyz[2]));
        }
        let mut triangles = Vec::with_capacity(nf);
        for _ in 0..nf {
            let line = lines.next().ok_or_else(|| Error::Parse("truncated face list".into()))?;
            let idx: Vec<usize> = line
                .split_whitespace()
                .map(|s| s.parse().map_err(|_| Error::Parse(format!("bad index `{s}`"))))
                .collect::<Result<_>>()?;
            if idx.len() != 4 || idx[0] != 3 {
                return Err(Error::Parse(format!("face line `{line}` is not a triangle")));
            }
            if idx[1..].iter().any(|&i| i >= nv) {
                return Err(Error::Parse(format!("face line `{line}` references a missing vertex")));
            }
            triangles.push([idx[1], idx[2], idx[3]]);
        }
        Ok(Self {
            vertices,
            triangles,
            level,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn closed_form_counts() {
        for level in 0..=5 {
            let m = SurfaceMesh::octahedron_sphere(level).unwrap();
            let p = 4usize.pow(level);
            assert_eq!(m.num_triangles(), 8 * p);
            assert_eq!(m.num_edges(), 12 * p);
            assert_eq!(m.num_vertices(), 2 + 4 * p);
            assert_eq!(m.euler_characteristic(), 2);
        }
        assert_eq!(SurfaceMesh::octahedron_sphere(1).unwrap().num_vertices(), 18);
        let m3 = SurfaceMesh::octahedron_sphere(3).unwrap();
        assert_eq!((m3.num_vertices(), m3.num_triangles()), (258, 512));
    }

    #[test]
    fn level_guard() {
        assert!(matches!(
            SurfaceMesh::octahedron_sphere(11),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn vertices_on_sphere_and_outward() {
        let m = SurfaceMesh::octahedron_sphere(4).unwrap();
        for v in m.vertices() {
            assert!((v.norm() - 1.0).abs() <= 1e-14);
        }
        for &[a, b, c] in m.triangles() {
            let (pa, pb, pc) = (m.vertices[a], m.vertices[b], m.vertices[c]);
            let n = (pb - pa).cross(&(pc - pa));
            assert!(n.dot(&((pa + pb + pc) / 3.0)) > 0.0);
        }
    }

    #[test]
    fn every_directed_edge_once() {
        let m = SurfaceMesh::octahedron_sphere(3).unwrap();
        let mut directed = HashSet::new();
        for t in m.triangles() {
            for k in 0..3 {
                assert!(directed.insert((t[k], t[(k + 1) % 3])));
            }
        }
        for &(a, b) in &directed {
            assert!(directed.contains(&(b, a)), "edge ({a},{b}) has no twin");
        }
    }

    #[test]
    fn refine_keeps_old_vertices() {
        let m0 = SurfaceMesh::octahedron_sphere(0).unwrap();
        let m1 = m0.refine();
        assert_eq!(m1.level(), 1);
        assert_eq!(m1.num_vertices(), 18);
        assert_eq!(&m1.vertices()[..6], m0.vertices());
        assert!(m1.measured_h() < m0.measured_h());
    }

    #[test]
    fn mesh_sizes() {
        let m0 = SurfaceMesh::octahedron_sphere(0).unwrap();
        assert!((m0.nominal_h() - 1.41421356).abs() < 1e-8);
        assert!((m0.measured_h() - std::f64::consts::SQRT_2).abs() < 1e-12);
        let m1 = m0.refine();
        // Vertex-to-midpoint edges have length sqrt(2 - sqrt(2)); the longest edges join
        // two projected midpoints, e.g. (x + y)/sqrt2 to (x + z)/sqrt2, of length 1.
        let short: f64 = (Vector3::<f64>::x() - Vector3::new(1.0, 0.0, 1.0).normalize()).norm();
        assert!((short - (2.0 - std::f64::consts::SQRT_2).sqrt()).abs() < 1e-15);
        assert!((m1.measured_h() - 1.0).abs() < 1e-12);
        assert!(m1.measured_h() > 0.70710678);
        let mut prev = m1;
        for _ in 2..=5 {
            let next = prev.refine();
            assert!(next.measured_h() < prev.measured_h());
            prev = next;
        }
    }

    #[test]
    fn area_converges_from_below() {
        let m0 = SurfaceMesh::octahedron_sphere(0).unwrap();
        assert!((m0.total_area() - 4.0 * 3f64.sqrt()).abs() < 1e-12);
        let mut mesh = m0;
        let mut prev = mesh.total_area();
        for _ in 1..=6 {
            mesh = mesh.refine();
            let a = mesh.total_area();
            assert!(a > prev && a < 4.0 * std::f64::consts::PI);
            prev = a;
        }
    }

    #[test]
    fn vertex_lookup() {
        let pole = Vector3::new(0.0, 0.0, 1.0);
        for level in 0..=3 {
            let m = SurfaceMesh::octahedron_sphere(level).unwrap();
            assert_eq!(m.vertex_at(&pole, 1e-12).unwrap(), NORTH_POLE);
            assert_eq!(m.vertex_at(&Vector3::new(1.0, 0.0, 0.0), 1e-12).unwrap(), 0);
        }
        let m0 = SurfaceMesh::octahedron_sphere(0).unwrap();
        assert!(matches!(
            m0.vertex_at(&Vector3::new(0.0, 0.0, 0.9), 1e-12),
            Err(Error::NotFound { .. })
        ));
        assert!(matches!(
            m0.vertex_at(&Vector3::zeros(), 1.5),
            Err(Error::Ambiguous { count: 6, .. })
        ));
        assert!(m0.vertex_at(&pole, 0.0).is_err());
    }

    #[test]
    fn off_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sphere.off");
        let m0 = SurfaceMesh::octahedron_sphere(0).unwrap();
        m0.export_off(&path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("OFF"));
        assert_eq!(lines.next(), Some("6 8 12"));

        let m2 = SurfaceMesh::octahedron_sphere(2).unwrap();
        m2.export_off(&path).unwrap();
        let back = SurfaceMesh::import_off(&path, 2).unwrap();
        assert_eq!(back.triangles(), m2.triangles());
        for (a, b) in back.vertices().iter().zip(m2.vertices()) {
            assert!((a - b).norm() <= 1e-15);
        }
    }

    #[test]
    fn off_export_to_empty_path_fails() {
        let m0 = SurfaceMesh::octahedron_sphere(0).unwrap();
        assert!(matches!(m0.export_off(""), Err(Error::Io(_))));
    }
}
