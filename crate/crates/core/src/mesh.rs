//! Conforming triangulations of polygonal 2D domains.
//!
//! A [`Triangulation`] is immutable once built. Edges are numbered by their
//! sorted vertex pair in lexicographic order, which makes edge-based dof maps
//! and red refinement deterministic.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};

pub type Point2 = Vector2<f64>;

/// Marker given to boundary edges when the vertex markers do not agree.
pub const DEFAULT_BOUNDARY_MARKER: i32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    /// Global edge index.
    pub edge: usize,
    pub vertices: [usize; 2],
    pub marker: i32,
}

#[derive(Debug, Clone)]
pub struct Triangulation {
    vertices: Vec<Point2>,
    vertex_markers: Vec<i32>,
    triangles: Vec<[usize; 3]>,
    edges: Vec<[usize; 2]>,
    /// Local edge `k` is the edge opposite local vertex `k`.
    triangle_edges: Vec<[usize; 3]>,
    edge_triangle_count: Vec<u8>,
    boundary_edges: Vec<BoundaryEdge>,
    level: usize,
}

/// Geometry of one element: affine map `x = origin + jacobian * xi` from the
/// reference triangle with vertices (0,0), (1,0), (0,1).
#[derive(Debug, Clone, Copy)]
pub struct ElementGeometry {
    pub triangle: usize,
    pub diameter: f64,
    pub inradius: f64,
    pub barycenter: Point2,
    pub area: f64,
    pub origin: Point2,
    pub jacobian: Matrix2<f64>,
    pub inverse_jacobian: Matrix2<f64>,
}

impl ElementGeometry {
    pub fn map(&self, xi: &Point2) -> Point2 {
        self.origin + self.jacobian * xi
    }

    /// Physical gradient from a reference gradient: `J^{-T} g`.
    pub fn physical_gradient(&self, reference: &Point2) -> Point2 {
        self.inverse_jacobian.transpose() * reference
    }
}

fn signed_area(a: &Point2, b: &Point2, c: &Point2) -> f64 {
    0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y))
}

fn sorted_pair(a: usize, b: usize) -> [usize; 2] {
    if a < b { [a, b] } else { [b, a] }
}

impl Triangulation {
    /// Builds a triangulation from raw vertex and triangle lists.
    ///
    /// Clockwise triangles are reoriented; degenerate ones are rejected.
    /// Boundary edges are those incident to exactly one triangle. Their
    /// marker is the common nonzero marker of both endpoints, or
    /// [`DEFAULT_BOUNDARY_MARKER`].
    pub fn new(
        vertices: Vec<Point2>,
        vertex_markers: Option<Vec<i32>>,
        mut triangles: Vec<[usize; 3]>,
    ) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::InvalidMesh("mesh has no vertices".into()));
        }
        if triangles.is_empty() {
            return Err(Error::InvalidMesh("mesh has no triangles".into()));
        }
        let n_v = vertices.len();
        let vertex_markers = match vertex_markers {
            Some(m) if m.len() == n_v => m,
            Some(m) => {
                return Err(Error::InvalidMesh(format!(
                    "{} vertex markers for {} vertices",
                    m.len(),
                    n_v
                )));
            }
            None => vec![0; n_v],
        };
        for (t, tri) in triangles.iter_mut().enumerate() {
            if tri.iter().any(|&v| v >= n_v) {
                return Err(Error::InvalidMesh(format!(
                    "triangle {t} references a vertex out of range"
                )));
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::InvalidMesh(format!("triangle {t} repeats a vertex")));
            }
            let area = signed_area(&vertices[tri[0]], &vertices[tri[1]], &vertices[tri[2]]);
            if area == 0.0 || !area.is_finite() {
                return Err(Error::InvalidMesh(format!("triangle {t} is degenerate")));
            }
            if area < 0.0 {
                tri.swap(1, 2);
            }
        }

        let mut edge_map: BTreeMap<[usize; 2], usize> = BTreeMap::new();
        for tri in &triangles {
            for k in 0..3 {
                edge_map.insert(sorted_pair(tri[(k + 1) % 3], tri[(k + 2) % 3]), 0);
            }
        }
        let edges: Vec<[usize; 2]> = edge_map.keys().copied().collect();
        for (i, id) in edge_map.values_mut().enumerate() {
            *id = i;
        }
        let mut edge_triangle_count = vec![0u8; edges.len()];
        let triangle_edges: Vec<[usize; 3]> = triangles
            .iter()
            .map(|tri| {
                let mut te = [0; 3];
                for k in 0..3 {
                    let e = edge_map[&sorted_pair(tri[(k + 1) % 3], tri[(k + 2) % 3])];
                    edge_triangle_count[e] = edge_triangle_count[e].saturating_add(1);
                    te[k] = e;
                }
                te
            })
            .collect();

        let boundary_edges = edges
            .iter()
            .enumerate()
            .filter(|(e, _)| edge_triangle_count[*e] == 1)
            .map(|(e, &[a, b])| {
                let (ma, mb) = (vertex_markers[a], vertex_markers[b]);
                let marker = if ma != 0 && ma == mb { ma } else { DEFAULT_BOUNDARY_MARKER };
                BoundaryEdge { edge: e, vertices: [a, b], marker }
            })
            .collect();

        Ok(Self {
            vertices,
            vertex_markers,
            triangles,
            edges,
            triangle_edges,
            edge_triangle_count,
            boundary_edges,
            level: 0,
        })
    }

    /// The unit square (0,1)^2 cut along both diagonals into four triangles.
    pub fn unit_square_initial() -> Self {
        let vertices = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
            Point2::new(0.5, 0.5),
        ];
        let markers = vec![1, 1, 1, 1, 0];
        let triangles = vec![[0, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4]];
        Self::new(vertices, Some(markers), triangles).expect("static mesh is valid")
    }

    /// The initial square refined `level` times.
    pub fn unit_square(level: usize) -> Self {
        (0..level).fold(Self::unit_square_initial(), |m, _| m.refine_red())
    }

    /// Splits every triangle into four by connecting edge midpoints.
    ///
    /// Vertex `n_vertices + e` of the result is the midpoint of edge `e`, and
    /// children of triangle `t` are `4t..4t+4`, the last one being the
    /// interior (inverted) child.
    pub fn refine_red(&self) -> Self {
        let n_v = self.vertices.len();
        let boundary_marker: HashMap<usize, i32> =
            self.boundary_edges.iter().map(|b| (b.edge, b.marker)).collect();
        let mut vertices = self.vertices.clone();
        let mut markers = self.vertex_markers.clone();
        for (e, &[a, b]) in self.edges.iter().enumerate() {
            vertices.push((self.vertices[a] + self.vertices[b]) * 0.5);
            markers.push(boundary_marker.get(&e).copied().unwrap_or(0));
        }
        let mut triangles = Vec::with_capacity(4 * self.triangles.len());
        for (tri, te) in self.triangles.iter().zip(&self.triangle_edges) {
            let [a, b, c] = *tri;
            // midpoint opposite local vertex k
            let m_bc = n_v + te[0];
            let m_ca = n_v + te[1];
            let m_ab = n_v + te[2];
            triangles.push([a, m_ab, m_ca]);
            triangles.push([m_ab, b, m_bc]);
            triangles.push([m_ca, m_bc, c]);
            triangles.push([m_bc, m_ca, m_ab]);
        }
        let mut fine = Self::new(vertices, Some(markers), triangles)
            .expect("red refinement of a valid mesh is valid");
        fine.level = self.level + 1;
        fine
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn vertex_markers(&self) -> &[i32] {
        &self.vertex_markers
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn triangle_edges(&self) -> &[[usize; 3]] {
        &self.triangle_edges
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Refinement depth; meshes built directly or imported have level 0.
    pub fn level(&self) -> usize {
        self.level
    }

    pub fn is_boundary_edge(&self, e: usize) -> bool {
        self.edge_triangle_count[e] == 1
    }

    pub fn boundary_vertex_flags(&self) -> Vec<bool> {
        let mut flags = vec![false; self.vertices.len()];
        for b in &self.boundary_edges {
            flags[b.vertices[0]] = true;
            flags[b.vertices[1]] = true;
        }
        flags
    }

    pub fn geometry(&self, t: usize) -> ElementGeometry {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        let jacobian = Matrix2::from_columns(&[pb - pa, pc - pa]);
        let area = 0.5 * jacobian.determinant();
        let lengths = [(pc - pb).norm(), (pa - pc).norm(), (pb - pa).norm()];
        let diameter = lengths.iter().copied().fold(0.0, f64::max);
        let perimeter: f64 = lengths.iter().sum();
        ElementGeometry {
            triangle: t,
            diameter,
            inradius: 2.0 * area / perimeter,
            barycenter: (pa + pb + pc) / 3.0,
            area,
            origin: pa,
            jacobian,
            inverse_jacobian: jacobian.try_inverse().unwrap_or_else(Matrix2::zeros),
        }
    }

    /// Largest element diameter.
    pub fn max_h(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.geometry(t).diameter).fold(0.0, f64::max)
    }

    /// Largest diameter-to-inradius ratio over all elements.
    pub fn chunkiness(&self) -> f64 {
        (0..self.n_triangles())
            .map(|t| {
                let g = self.geometry(t);
                g.diameter / g.inradius
            })
            .fold(0.0, f64::max)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.geometry(t).area).sum()
    }

    /// Smallest interior angle in degrees.
    pub fn min_angle_degrees(&self) -> f64 {
        let mut min = f64::INFINITY;
        for tri in &self.triangles {
            for k in 0..3 {
                let p = self.vertices[tri[k]];
                let u = self.vertices[tri[(k + 1) % 3]] - p;
                let v = self.vertices[tri[(k + 2) % 3]] - p;
                let cos = (u.dot(&v) / (u.norm() * v.norm())).clamp(-1.0, 1.0);
                min = min.min(cos.acos().to_degrees());
            }
        }
        min
    }

    pub fn vertex_to_triangles(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.vertices.len()];
        for (t, tri) in self.triangles.iter().enumerate() {
            for &v in tri {
                adj[v].push(t);
            }
        }
        adj
    }

    /// All triangles sharing at least one vertex with `t` (including `t`),
    /// sorted ascending.
    pub fn element_patch(&self, t: usize) -> Vec<usize> {
        let mut patch: Vec<usize> = self
            .triangles
            .iter()
            .enumerate()
            .filter(|(_, other)| other.iter().any(|v| self.triangles[t].contains(v)))
            .map(|(s, _)| s)
            .collect();
        patch.sort_unstable();
        patch
    }

    /// Checks conformity; returns a list of problems (empty when conforming).
    ///
    /// Detects edges shared by more than two triangles, shared edges
    /// traversed in the same direction by both neighbours, unreferenced
    /// vertices, and hanging vertices lying inside a boundary edge.
    pub fn conformity_violations(&self) -> Vec<String> {
        let mut problems = Vec::new();
        for (e, &count) in self.edge_triangle_count.iter().enumerate() {
            if count > 2 {
                problems.push(format!("edge {:?} shared by {count} triangles", self.edges[e]));
            }
        }
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        for tri in &self.triangles {
            for k in 0..3 {
                *directed.entry((tri[k], tri[(k + 1) % 3])).or_default() += 1;
            }
        }
        for (&(a, b), &n) in &directed {
            if n > 1 {
                problems.push(format!("directed edge ({a},{b}) appears {n} times"));
            }
        }
        let mut used = vec![false; self.vertices.len()];
        for tri in &self.triangles {
            for &v in tri {
                used[v] = true;
            }
        }
        if let Some(v) = used.iter().position(|u| !u) {
            problems.push(format!("vertex {v} belongs to no triangle"));
        }
        let candidates: Vec<usize> = {
            let mut c: Vec<usize> =
                self.boundary_edges.iter().flat_map(|b| b.vertices).collect();
            c.sort_unstable();
            c.dedup();
            c
        };
        for b in &self.boundary_edges {
            let (pa, pb) = (self.vertices[b.vertices[0]], self.vertices[b.vertices[1]]);
            let d = pb - pa;
            let len2 = d.norm_squared();
            for &v in &candidates {
                if b.vertices.contains(&v) {
                    continue;
                }
                let w = self.vertices[v] - pa;
                let s = w.dot(&d) / len2;
                let cross = d.x * w.y - d.y * w.x;
                if s > 1e-12 && s < 1.0 - 1e-12 && cross.abs() <= 1e-12 * len2 {
                    problems.push(format!(
                        "vertex {v} hangs on edge ({}, {})",
                        b.vertices[0], b.vertices[1]
                    ));
                }
            }
        }
        problems
    }

    pub fn is_conforming(&self) -> bool {
        self.conformity_violations().is_empty()
    }

    /// Serializes to the node/ele text format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{} 2 0 1", self.vertices.len()).unwrap();
        for (i, (p, m)) in self.vertices.iter().zip(&self.vertex_markers).enumerate() {
            // `{:?}` prints the shortest representation that round-trips
            writeln!(out, "{i} {:?} {:?} {m}", p.x, p.y).unwrap();
        }
        writeln!(out, "{} 3 0", self.triangles.len()).unwrap();
        for (i, t) in self.triangles.iter().enumerate() {
            writeln!(out, "{i} {} {} {}", t[0], t[1], t[2]).unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        Self::parse_text(text, true)
    }

    fn parse_text(text: &str, validate: bool) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());

        let parse_err = |line: usize, message: String| Error::Parse { line, message };
        let mut next_line = |what: &str| {
            lines
                .next()
                .ok_or_else(|| parse_err(0, format!("unexpected end of file, expected {what}")))
        };

        let (ln, header) = next_line("node header")?;
        let hdr: Vec<&str> = header.split_whitespace().collect();
        if hdr.len() != 4 || hdr[1] != "2" {
            return Err(parse_err(ln, format!("bad node header `{header}`")));
        }
        let n_v: usize = hdr[0]
            .parse()
            .map_err(|_| parse_err(ln, format!("bad vertex count `{}`", hdr[0])))?;
        let mut vertices = Vec::with_capacity(n_v);
        let mut markers = Vec::with_capacity(n_v);
        for i in 0..n_v {
            let (ln, l) = next_line("vertex line")?;
            let f: Vec<&str> = l.split_whitespace().collect();
            if f.len() != 4 {
                return Err(parse_err(ln, format!("expected `id x y marker`, got `{l}`")));
            }
            let id: usize = f[0].parse().map_err(|_| parse_err(ln, "bad vertex id".into()))?;
            if id != i {
                return Err(parse_err(ln, format!("vertex id {id} out of order, expected {i}")));
            }
            let x: f64 = f[1].parse().map_err(|_| parse_err(ln, "bad x coordinate".into()))?;
            let y: f64 = f[2].parse().map_err(|_| parse_err(ln, "bad y coordinate".into()))?;
            let m: i32 = f[3].parse().map_err(|_| parse_err(ln, "bad marker".into()))?;
            vertices.push(Point2::new(x, y));
            markers.push(m);
        }
        let (ln, header) = next_line("element header")?;
        let hdr: Vec<&str> = header.split_whitespace().collect();
        if hdr.len() != 3 || hdr[1] != "3" {
            return Err(parse_err(ln, format!("bad element header `{header}`")));
        }
        let n_t: usize = hdr[0]
            .parse()
            .map_err(|_| parse_err(ln, format!("bad element count `{}`", hdr[0])))?;
        let mut triangles = Vec::with_capacity(n_t);
        for i in 0..n_t {
            let (ln, l) = next_line("element line")?;
            let f: Vec<usize> = l
                .split_whitespace()
                .map(|s| s.parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| parse_err(ln, format!("bad element line `{l}`")))?;
            if f.len() != 4 {
                return Err(parse_err(ln, format!("expected `id v0 v1 v2`, got `{l}`")));
            }
            if f[0] != i {
                return Err(parse_err(ln, format!("element id {} out of order", f[0])));
            }
            triangles.push([f[1], f[2], f[3]]);
        }
        if let Some((ln, l)) = lines.next() {
            return Err(parse_err(ln, format!("trailing content `{l}`")));
        }
        let mesh = Self::new(vertices, Some(markers), triangles)?;
        let problems = if validate { mesh.conformity_violations() } else { Vec::new() };
        if !problems.is_empty() {
            return Err(Error::InvalidMesh(problems.join("; ")));
        }
        Ok(mesh)
    }

    /// Reads a mesh without the conformity check (used by diagnostics).
    pub fn from_text_unchecked(text: &str) -> Result<Self> {
        Self::parse_text(text, false)
    }

    pub fn import(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    pub fn export(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct MeshStats {
    pub n_vertices: usize,
    pub n_triangles: usize,
    pub max_h: f64,
    pub min_angle_degrees: f64,
    pub total_area: f64,
    pub violations: Vec<String>,
}

impl MeshStats {
    pub fn of(mesh: &Triangulation) -> Self {
        Self {
            n_vertices: mesh.n_vertices(),
            n_triangles: mesh.n_triangles(),
            max_h: mesh.max_h(),
            min_angle_degrees: mesh.min_angle_degrees(),
            total_area: mesh.total_area(),
            violations: mesh.conformity_violations(),
        }
    }

    pub fn verdict(&self) -> &'static str {
        if self.violations.is_empty() { "PASS" } else { "FAIL" }
    }
}
