//! Lagrange finite element spaces and their dof maps.
//!
//! Scalar dofs are numbered vertices first, then edges (P2) or elements
//! (bubble). A vector-valued space stacks one scalar copy per component:
//! dof `c * n_scalar + i` is component `c` of scalar dof `i`.

use nalgebra::Vector2;

use crate::error::{Error, Result};
use crate::mesh::{Point2, Triangulation};
use crate::quadrature::QuadratureRule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    P0,
    P1,
    P2,
    /// Continuous P1 enriched by the cubic bubble `27 l0 l1 l2`.
    P1Bubble,
}

impl Family {
    pub fn local_dofs(self) -> usize {
        match self {
            Family::P0 => 1,
            Family::P1 => 3,
            Family::P2 => 6,
            Family::P1Bubble => 4,
        }
    }

    /// Polynomial degree of the local basis.
    pub fn degree(self) -> usize {
        match self {
            Family::P0 => 0,
            Family::P1 => 1,
            Family::P2 => 2,
            Family::P1Bubble => 3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FeSpace {
    family: Family,
    value_dim: usize,
    n_scalar: usize,
    element_dofs: Vec<[usize; 6]>,
    nodes: Vec<Point2>,
    boundary: Vec<usize>,
}

fn barycentric(xi: &Point2) -> [f64; 3] {
    [1.0 - xi.x - xi.y, xi.x, xi.y]
}

const LAMBDA_GRAD: [[f64; 2]; 3] = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];

fn lambda_grad(i: usize) -> Point2 {
    Point2::new(LAMBDA_GRAD[i][0], LAMBDA_GRAD[i][1])
}

/// Values and reference gradients of the local basis of `family` at the
/// reference point `xi`. Only the first `family.local_dofs()` entries are
/// meaningful.
pub fn eval_basis(family: Family, xi: &Point2) -> ([f64; 6], [Point2; 6]) {
    let l = barycentric(xi);
    let mut v = [0.0; 6];
    let mut g = [Point2::zeros(); 6];
    match family {
        Family::P0 => {
            v[0] = 1.0;
        }
        Family::P1 | Family::P1Bubble => {
            for i in 0..3 {
                v[i] = l[i];
                g[i] = lambda_grad(i);
            }
            if family == Family::P1Bubble {
                v[3] = 27.0 * l[0] * l[1] * l[2];
                g[3] = (lambda_grad(0) * (l[1] * l[2])
                    + lambda_grad(1) * (l[0] * l[2])
                    + lambda_grad(2) * (l[0] * l[1]))
                    * 27.0;
            }
        }
        Family::P2 => {
            for i in 0..3 {
                v[i] = l[i] * (2.0 * l[i] - 1.0);
                g[i] = lambda_grad(i) * (4.0 * l[i] - 1.0);
            }
            for k in 0..3 {
                let (i, j) = ((k + 1) % 3, (k + 2) % 3);
                v[3 + k] = 4.0 * l[i] * l[j];
                g[3 + k] = (lambda_grad(i) * l[j] + lambda_grad(j) * l[i]) * 4.0;
            }
        }
    }
    (v, g)
}

/// Reference basis values and gradients tabulated at the points of a rule.
#[derive(Debug, Clone)]
pub struct BasisTable {
    pub n_local: usize,
    pub values: Vec<[f64; 6]>,
    pub gradients: Vec<[Point2; 6]>,
}

impl BasisTable {
    pub fn new(family: Family, rule: &QuadratureRule) -> Self {
        let (values, gradients) = rule
            .points()
            .iter()
            .map(|b| eval_basis(family, &Point2::new(b[1], b[2])))
            .unzip();
        Self { n_local: family.local_dofs(), values, gradients }
    }
}

impl FeSpace {
    pub fn new(mesh: &Triangulation, family: Family, value_dim: usize) -> Result<Self> {
        if value_dim == 0 || value_dim > 2 {
            return Err(Error::Unsupported(format!("value dimension {value_dim}")));
        }
        let n_v = mesh.n_vertices();
        let n_t = mesh.n_triangles();
        let tris = mesh.triangles();
        let mut element_dofs = vec![[usize::MAX; 6]; n_t];
        let mut nodes: Vec<Point2>;
        let mut boundary: Vec<usize> = Vec::new();
        let boundary_vertices = mesh.boundary_vertex_flags();
        let vertex_boundary = || {
            boundary_vertices.iter().enumerate().filter(|(_, b)| **b).map(|(i, _)| i)
        };
        let n_scalar = match family {
            Family::P0 => {
                for (t, d) in element_dofs.iter_mut().enumerate() {
                    d[0] = t;
                }
                nodes = (0..n_t).map(|t| mesh.geometry(t).barycenter).collect();
                n_t
            }
            Family::P1 => {
                for (d, tri) in element_dofs.iter_mut().zip(tris) {
                    d[..3].copy_from_slice(tri);
                }
                nodes = mesh.vertices().to_vec();
                boundary.extend(vertex_boundary());
                n_v
            }
            Family::P1Bubble => {
                for (t, (d, tri)) in element_dofs.iter_mut().zip(tris).enumerate() {
                    d[..3].copy_from_slice(tri);
                    d[3] = n_v + t;
                }
                nodes = mesh.vertices().to_vec();
                nodes.extend((0..n_t).map(|t| mesh.geometry(t).barycenter));
                boundary.extend(vertex_boundary());
                n_v + n_t
            }
            Family::P2 => {
                for ((d, tri), te) in element_dofs.iter_mut().zip(tris).zip(mesh.triangle_edges()) {
                    d[..3].copy_from_slice(tri);
                    for k in 0..3 {
                        d[3 + k] = n_v + te[k];
                    }
                }
                nodes = mesh.vertices().to_vec();
                let verts = mesh.vertices();
                nodes.extend(mesh.edges().iter().map(|&[a, b]| (verts[a] + verts[b]) * 0.5));
                boundary.extend(vertex_boundary());
                boundary.extend(mesh.boundary_edges().iter().map(|b| n_v + b.edge));
                n_v + mesh.n_edges()
            }
        };
        boundary.sort_unstable();
        Ok(Self { family, value_dim, n_scalar, element_dofs, nodes, boundary })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn value_dim(&self) -> usize {
        self.value_dim
    }

    pub fn n_scalar_dofs(&self) -> usize {
        self.n_scalar
    }

    pub fn n_dofs(&self) -> usize {
        self.n_scalar * self.value_dim
    }

    pub fn n_local(&self) -> usize {
        self.family.local_dofs()
    }

    /// Scalar dof indices of element `t`.
    pub fn element_dofs(&self, t: usize) -> &[usize] {
        &self.element_dofs[t][..self.family.local_dofs()]
    }

    /// Nodal points of the scalar dofs (bubble nodes sit at barycenters).
    pub fn nodes(&self) -> &[Point2] {
        &self.nodes
    }

    /// Sorted scalar dofs whose basis functions do not vanish on the boundary.
    pub fn boundary_scalar_dofs(&self) -> &[usize] {
        &self.boundary
    }

    /// Boundary dofs of all components.
    pub fn boundary_dofs(&self) -> Vec<usize> {
        (0..self.value_dim)
            .flat_map(|c| self.boundary.iter().map(move |&i| c * self.n_scalar + i))
            .collect()
    }

    pub fn is_bubble_dof(&self, scalar: usize, mesh: &Triangulation) -> bool {
        self.family == Family::P1Bubble && scalar >= mesh.n_vertices()
    }

    /// Nodal interpolation of a scalar function; bubble dofs are set to 0.
    pub fn interpolate_scalar(&self, f: impl Fn(&Point2) -> f64) -> Result<Vec<f64>> {
        if self.value_dim != 1 {
            return Err(Error::Dimension("scalar interpolation into a vector space".into()));
        }
        let n_nodal = self.nodal_count();
        let mut out = vec![0.0; self.n_scalar];
        for (i, x) in self.nodes.iter().enumerate().take(n_nodal) {
            let v = f(x);
            if !v.is_finite() {
                return Err(Error::Domain(format!("function undefined at node {i} ({}, {})", x.x, x.y)));
            }
            out[i] = v;
        }
        Ok(out)
    }

    /// Nodal interpolation of a vector function; bubble dofs are set to 0.
    pub fn interpolate_vector(&self, f: impl Fn(&Point2) -> Vector2<f64>) -> Result<Vec<f64>> {
        if self.value_dim != 2 {
            return Err(Error::Dimension("vector interpolation into a scalar space".into()));
        }
        let n_nodal = self.nodal_count();
        let mut out = vec![0.0; 2 * self.n_scalar];
        for (i, x) in self.nodes.iter().enumerate().take(n_nodal) {
            let v = f(x);
            if !(v.x.is_finite() && v.y.is_finite()) {
                return Err(Error::Domain(format!("function undefined at node {i} ({}, {})", x.x, x.y)));
            }
            out[i] = v.x;
            out[self.n_scalar + i] = v.y;
        }
        Ok(out)
    }

    fn nodal_count(&self) -> usize {
        match self.family {
            Family::P1Bubble => self.n_scalar - self.element_dofs.len(),
            _ => self.n_scalar,
        }
    }

    /// Evaluates component `c` of the discrete function `dofs` at reference
    /// point `xi` of element `t`.
    pub fn eval_component(&self, dofs: &[f64], c: usize, t: usize, xi: &Point2) -> f64 {
        let (v, _) = eval_basis(self.family, xi);
        let off = c * self.n_scalar;
        self.element_dofs(t).iter().zip(v).map(|(&d, b)| dofs[off + d] * b).sum()
    }

    /// Physical gradient of component `c` at reference point `xi` of `t`.
    pub fn grad_component(
        &self,
        mesh: &Triangulation,
        dofs: &[f64],
        c: usize,
        t: usize,
        xi: &Point2,
    ) -> Point2 {
        let (_, g) = eval_basis(self.family, xi);
        let geo = mesh.geometry(t);
        let off = c * self.n_scalar;
        let reference: Point2 =
            self.element_dofs(t).iter().zip(g).map(|(&d, gr)| gr * dofs[off + d]).sum();
        geo.physical_gradient(&reference)
    }
}

/// A stable velocity/pressure pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MixedPair {
    /// (P1 + bubble)^2 / P1
    Mini,
    /// (P2)^2 / P1
    TaylorHood,
}

impl MixedPair {
    pub fn velocity_family(self) -> Family {
        match self {
            MixedPair::Mini => Family::P1Bubble,
            MixedPair::TaylorHood => Family::P2,
        }
    }

    pub fn pressure_family(self) -> Family {
        Family::P1
    }

    pub fn name(self) -> &'static str {
        match self {
            MixedPair::Mini => "mini",
            MixedPair::TaylorHood => "taylor-hood",
        }
    }

    /// Quadrature degree used for element integrals in assembly.
    pub fn assembly_degree(self) -> usize {
        2 * self.velocity_family().degree() + 2
    }
}

impl std::str::FromStr for MixedPair {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mini" => Ok(MixedPair::Mini),
            "taylor-hood" | "taylorhood" | "th" => Ok(MixedPair::TaylorHood),
            other => Err(Error::Config(format!("unknown element `{other}`"))),
        }
    }
}

/// Velocity and pressure spaces of a pair on one mesh.
#[derive(Debug, Clone)]
pub struct MixedSpaces {
    pub pair: MixedPair,
    pub velocity: FeSpace,
    pub pressure: FeSpace,
}

impl MixedSpaces {
    pub fn new(mesh: &Triangulation, pair: MixedPair) -> Result<Self> {
        Ok(Self {
            pair,
            velocity: FeSpace::new(mesh, pair.velocity_family(), 2)?,
            pressure: FeSpace::new(mesh, pair.pressure_family(), 1)?,
        })
    }

    pub fn n_velocity(&self) -> usize {
        self.velocity.n_dofs()
    }

    pub fn n_pressure(&self) -> usize {
        self.pressure.n_dofs()
    }

    /// Velocity + pressure + one zero-mean multiplier.
    pub fn n_total(&self) -> usize {
        self.n_velocity() + self.n_pressure() + 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_ref_point(rng: &mut impl Rng) -> Point2 {
        loop {
            let p = Point2::new(rng.random::<f64>(), rng.random::<f64>());
            if p.x + p.y <= 1.0 {
                return p;
            }
        }
    }

    #[test]
    fn dof_counts_on_initial_square() {
        let m = Triangulation::unit_square_initial();
        assert_eq!(FeSpace::new(&m, Family::P1, 1).unwrap().n_dofs(), 5);
        assert_eq!(FeSpace::new(&m, Family::P2, 1).unwrap().n_dofs(), 13);
        assert_eq!(FeSpace::new(&m, Family::P1Bubble, 1).unwrap().n_dofs(), 9);
        assert_eq!(FeSpace::new(&m, Family::P0, 1).unwrap().n_dofs(), 4);
        assert_eq!(FeSpace::new(&m, Family::P2, 2).unwrap().n_dofs(), 26);
    }

    #[test]
    fn dof_counts_on_refined_levels() {
        let mut m = Triangulation::unit_square_initial();
        for _ in 0..4 {
            m = m.refine_red();
            let (nv, ne, nt) = (m.n_vertices(), m.n_edges(), m.n_triangles());
            assert_eq!(FeSpace::new(&m, Family::P1, 2).unwrap().n_dofs(), 2 * nv);
            assert_eq!(FeSpace::new(&m, Family::P2, 1).unwrap().n_dofs(), nv + ne);
            assert_eq!(FeSpace::new(&m, Family::P1Bubble, 1).unwrap().n_dofs(), nv + nt);
            assert_eq!(FeSpace::new(&m, Family::P0, 1).unwrap().n_dofs(), nt);
        }
    }

    #[test]
    fn lagrange_properties() {
        let corners = [Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)];
        for (i, c) in corners.iter().enumerate() {
            let (v, _) = eval_basis(Family::P1, c);
            for j in 0..3 {
                assert_eq!(v[j], if i == j { 1.0 } else { 0.0 });
            }
        }
        let (v, _) = eval_basis(Family::P1Bubble, &Point2::new(1.0 / 3.0, 1.0 / 3.0));
        assert!((v[3] - 1.0).abs() < 1e-15);
        let mids = [Point2::new(0.5, 0.5), Point2::new(0.0, 0.5), Point2::new(0.5, 0.0)];
        let nodes: Vec<Point2> = corners.iter().chain(mids.iter()).copied().collect();
        for (i, x) in nodes.iter().enumerate() {
            let (v, _) = eval_basis(Family::P2, x);
            for j in 0..6 {
                assert!((v[j] - if i == j { 1.0 } else { 0.0 }).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn bubble_vanishes_on_element_boundary() {
        for s in [0.0, 0.3, 0.8, 1.0] {
            for x in [Point2::new(s, 0.0), Point2::new(0.0, s), Point2::new(s, 1.0 - s)] {
                assert_eq!(eval_basis(Family::P1Bubble, &x).0[3].abs(), 0.0);
            }
        }
    }

    #[test]
    fn partition_of_unity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let x = random_ref_point(&mut rng);
            for fam in [Family::P1, Family::P2] {
                let (v, g) = eval_basis(fam, &x);
                let n = fam.local_dofs();
                assert!((v[..n].iter().sum::<f64>() - 1.0).abs() < 1e-14);
                assert!(g[..n].iter().sum::<Point2>().norm() < 1e-13);
            }
        }
    }

    #[test]
    fn reference_gradients_match_finite_differences() {
        let x = Point2::new(0.21, 0.33);
        let h = 1e-6;
        for fam in [Family::P1Bubble, Family::P2] {
            let (_, g) = eval_basis(fam, &x);
            for k in 0..2 {
                let mut e = Point2::zeros();
                e[k] = h;
                let (vp, _) = eval_basis(fam, &(x + e));
                let (vm, _) = eval_basis(fam, &(x - e));
                for i in 0..fam.local_dofs() {
                    assert!(((vp[i] - vm[i]) / (2.0 * h) - g[i][k]).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn continuity_across_shared_edges() {
        let m = Triangulation::unit_square(2);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for fam in [Family::P1, Family::P2, Family::P1Bubble] {
            let s = FeSpace::new(&m, fam, 1).unwrap();
            let dofs: Vec<f64> = (0..s.n_dofs()).map(|_| rng.random::<f64>() - 0.5).collect();
            // for every interior edge, compare traces from both sides
            let mut owners: std::collections::HashMap<usize, Vec<usize>> = Default::default();
            for (t, te) in m.triangle_edges().iter().enumerate() {
                for &e in te {
                    owners.entry(e).or_default().push(t);
                }
            }
            for (e, ts) in owners.iter().filter(|(_, v)| v.len() == 2) {
                let [a, b] = m.edges()[*e];
                for k in 1..=5 {
                    let sfrac = k as f64 / 6.0;
                    let x = m.vertices()[a] * (1.0 - sfrac) + m.vertices()[b] * sfrac;
                    let vals: Vec<f64> = ts
                        .iter()
                        .map(|&t| {
                            let g = m.geometry(t);
                            let xi = g.inverse_jacobian * (x - g.origin);
                            s.eval_component(&dofs, 0, t, &xi)
                        })
                        .collect();
                    assert!((vals[0] - vals[1]).abs() < 1e-13, "{fam:?} edge {e}");
                }
            }
        }
    }

    #[test]
    fn interpolation_reproduces_polynomials() {
        let m = Triangulation::unit_square(1);
        let p1 = FeSpace::new(&m, Family::P1, 1).unwrap();
        let ones = p1.interpolate_scalar(|_| 1.0).unwrap();
        assert!(ones.iter().all(|&v| v == 1.0));

        let lin = |x: &Point2| 0.3 + 2.0 * x.x - 1.5 * x.y;
        let quad = |x: &Point2| 1.0 - x.x * x.x + 3.0 * x.x * x.y + 0.5 * x.y * x.y;
        let d1 = p1.interpolate_scalar(lin).unwrap();
        let p2 = FeSpace::new(&m, Family::P2, 1).unwrap();
        let d2 = p2.interpolate_scalar(quad).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..30 {
            let t = rng.random_range(0..m.n_triangles());
            let xi = random_ref_point(&mut rng);
            let x = m.geometry(t).map(&xi);
            assert!((p1.eval_component(&d1, 0, t, &xi) - lin(&x)).abs() < 1e-14);
            assert!((p2.eval_component(&d2, 0, t, &xi) - quad(&x)).abs() < 1e-14);
        }
    }

    #[test]
    fn interpolation_rejects_undefined_values() {
        let m = Triangulation::unit_square_initial();
        let p1 = FeSpace::new(&m, Family::P1, 1).unwrap();
        let r = p1.interpolate_scalar(|x| 1.0 / x.norm());
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn boundary_dofs_are_exactly_those_on_the_boundary() {
        let m = Triangulation::unit_square(2);
        for fam in [Family::P1, Family::P2, Family::P1Bubble] {
            let s = FeSpace::new(&m, fam, 1).unwrap();
            let on_boundary = |x: &Point2| {
                x.x.abs() < 1e-14 || x.y.abs() < 1e-14 || (x.x - 1.0).abs() < 1e-14 || (x.y - 1.0).abs() < 1e-14
            };
            let expected: Vec<usize> = s
                .nodes()
                .iter()
                .enumerate()
                .filter(|(i, x)| on_boundary(x) && !s.is_bubble_dof(*i, &m))
                .map(|(i, _)| i)
                .collect();
            assert_eq!(s.boundary_scalar_dofs(), expected.as_slice());
        }
    }

    #[test]
    fn mixed_pair_parsing() {
        assert_eq!("mini".parse::<MixedPair>().unwrap(), MixedPair::Mini);
        assert_eq!("taylor-hood".parse::<MixedPair>().unwrap(), MixedPair::TaylorHood);
        assert!("crouzeix".parse::<MixedPair>().is_err());
        assert_eq!(MixedPair::Mini.assembly_degree(), 8);
        assert_eq!(MixedPair::TaylorHood.assembly_degree(), 6);
    }
}
