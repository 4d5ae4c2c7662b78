//! Residual and Jacobian of the discrete mixed problem.
//!
//! Unknowns are ordered velocity, pressure, then one scalar multiplier that
//! enforces a zero-mean pressure. The equations are
//!
//! ```text
//! (S_h(Dv), Dz) + b(v, v, z) - (q, div z) = L(z)   for velocity tests z
//! -(div v, r) + lambda (1, r)             = 0      for pressure tests r
//! (q, 1)                                  = 0
//! ```
//!
//! with the skew convective form `b(u, w, z) = 1/2 (z (x) u, grad w)
//! - 1/2 (w (x) u, grad z)`. This sign choice makes the Stokes part of the
//! Jacobian symmetric. Dirichlet velocity dofs are removed by symmetric
//! elimination: their residual entries are zero and their matrix rows and
//! columns are unit vectors.

use nalgebra::Vector2;

use crate::error::{Error, Result};
use crate::exponent::{DiscreteExponent, StressLaw, Tensor2};
use crate::mesh::{Point2, Triangulation};
use crate::quadrature::{self, QuadratureRule};
use crate::sparse::{CsrMatrix, Triplets};
use crate::spaces::{BasisTable, FeSpace, MixedPair, MixedSpaces};

/// Velocity dofs, pressure dofs and the zero-mean multiplier.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedSolution {
    pub velocity: Vec<f64>,
    pub pressure: Vec<f64>,
    pub multiplier: f64,
}

impl MixedSolution {
    pub fn zeros(spaces: &MixedSpaces) -> Self {
        Self {
            velocity: vec![0.0; spaces.n_velocity()],
            pressure: vec![0.0; spaces.n_pressure()],
            multiplier: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.velocity.len() + self.pressure.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.len());
        v.extend_from_slice(&self.velocity);
        v.extend_from_slice(&self.pressure);
        v.push(self.multiplier);
        v
    }

    pub fn from_slice(x: &[f64], n_velocity: usize, n_pressure: usize) -> Result<Self> {
        if x.len() != n_velocity + n_pressure + 1 {
            return Err(Error::Dimension(format!(
                "expected {} unknowns, got {}",
                n_velocity + n_pressure + 1,
                x.len()
            )));
        }
        Ok(Self {
            velocity: x[..n_velocity].to_vec(),
            pressure: x[n_velocity..n_velocity + n_pressure].to_vec(),
            multiplier: x[n_velocity + n_pressure],
        })
    }

    /// `self + step * dx`, with `dx` a flat increment.
    pub fn axpy(&self, step: f64, dx: &[f64]) -> Self {
        let nv = self.velocity.len();
        let np = self.pressure.len();
        Self {
            velocity: self.velocity.iter().zip(&dx[..nv]).map(|(a, d)| a + step * d).collect(),
            pressure: self.pressure.iter().zip(&dx[nv..nv + np]).map(|(a, d)| a + step * d).collect(),
            multiplier: self.multiplier + step * dx[nv + np],
        }
    }
}

/// Assembled Newton system: Jacobian and residual with Dirichlet rows
/// eliminated.
#[derive(Debug, Clone)]
pub struct MixedSystem {
    pub matrix: CsrMatrix,
    pub residual: Vec<f64>,
    pub n_velocity: usize,
    pub n_pressure: usize,
}

impl MixedSystem {
    /// Index of the multiplier unknown.
    pub fn multiplier_index(&self) -> usize {
        self.n_velocity + self.n_pressure
    }

    /// Symmetric elimination of `dofs`: rows and columns become unit
    /// vectors and the residual entries vanish.
    pub fn apply_dirichlet(&mut self, dofs: &[usize]) {
        self.matrix.eliminate_symmetric(dofs);
        for &d in dofs {
            self.residual[d] = 0.0;
        }
    }
}

/// Sets the Dirichlet velocity dofs of `u` to the nodal values of `g`.
pub fn set_dirichlet_values(
    u: &mut MixedSolution,
    space: &FeSpace,
    g: impl Fn(&Point2) -> Vector2<f64>,
) -> Result<()> {
    let n = space.n_scalar_dofs();
    for &i in space.boundary_scalar_dofs() {
        let x = space.nodes()[i];
        let v = g(&x);
        if !(v.x.is_finite() && v.y.is_finite()) {
            return Err(Error::Domain(format!("boundary data undefined at ({}, {})", x.x, x.y)));
        }
        u.velocity[i] = v.x;
        u.velocity[n + i] = v.y;
    }
    Ok(())
}

/// Per-element reference data shared by the loops below.
struct Tables {
    rule: QuadratureRule,
    velocity: BasisTable,
    pressure: BasisTable,
}

impl Tables {
    fn new(spaces: &MixedSpaces, degree: usize) -> Result<Self> {
        let rule = quadrature::rule(degree)?;
        Ok(Self {
            velocity: BasisTable::new(spaces.velocity.family(), &rule),
            pressure: BasisTable::new(spaces.pressure.family(), &rule),
            rule,
        })
    }
}

/// Physical gradients of the local basis at quadrature point `q`.
fn physical_gradients(table: &BasisTable, q: usize, inv_t: &nalgebra::Matrix2<f64>) -> [Point2; 6] {
    let mut g = [Point2::zeros(); 6];
    for (a, ga) in g.iter_mut().enumerate().take(table.n_local) {
        *ga = inv_t * table.gradients[q][a];
    }
    g
}

/// Discrete problem on one mesh: stress law, frozen exponent, load
/// functional and Dirichlet set.
#[derive(Debug, Clone)]
pub struct DiscreteProblem<'a> {
    pub mesh: &'a Triangulation,
    pub spaces: &'a MixedSpaces,
    pub law: &'a StressLaw,
    pub exponent: &'a DiscreteExponent,
    /// Values `L(z_i)` for every velocity basis function.
    pub load: Vec<f64>,
    pub convection: bool,
    dirichlet: Vec<usize>,
    tables_degree: usize,
}

impl<'a> DiscreteProblem<'a> {
    pub fn new(
        mesh: &'a Triangulation,
        spaces: &'a MixedSpaces,
        law: &'a StressLaw,
        exponent: &'a DiscreteExponent,
        load: Vec<f64>,
        convection: bool,
    ) -> Result<Self> {
        if exponent.values().len() != mesh.n_triangles() {
            return Err(Error::Dimension(format!(
                "exponent has {} values for {} elements",
                exponent.values().len(),
                mesh.n_triangles()
            )));
        }
        if load.len() != spaces.n_velocity() {
            return Err(Error::Dimension(format!(
                "load has {} entries for {} velocity dofs",
                load.len(),
                spaces.n_velocity()
            )));
        }
        Ok(Self {
            mesh,
            spaces,
            law,
            exponent,
            load,
            convection,
            dirichlet: spaces.velocity.boundary_dofs(),
            tables_degree: spaces.pair.assembly_degree(),
        })
    }

    pub fn pair(&self) -> MixedPair {
        self.spaces.pair
    }

    /// Global indices of the constrained velocity dofs.
    pub fn dirichlet_dofs(&self) -> &[usize] {
        &self.dirichlet
    }

    pub fn n_unknowns(&self) -> usize {
        self.spaces.n_total()
    }

    /// Residual of all three blocks with Dirichlet rows zeroed.
    pub fn residual(&self, u: &MixedSolution) -> Result<Vec<f64>> {
        self.assemble(u, None)
    }

    /// Jacobian and residual at `u`, Dirichlet dofs eliminated.
    pub fn system(&self, u: &MixedSolution) -> Result<MixedSystem> {
        let n = self.n_unknowns();
        let n_loc = self.spaces.velocity.n_local();
        let per_elem = (2 * n_loc + 3).pow(2) + 6;
        let mut trip = Triplets::with_capacity(n, n, per_elem * self.mesh.n_triangles());
        let residual = self.assemble(u, Some(&mut trip))?;
        let mut sys = MixedSystem {
            matrix: trip.to_csr(),
            residual,
            n_velocity: self.spaces.n_velocity(),
            n_pressure: self.spaces.n_pressure(),
        };
        sys.apply_dirichlet(&self.dirichlet);
        Ok(sys)
    }

    /// Jacobian only.
    pub fn jacobian(&self, u: &MixedSolution) -> Result<CsrMatrix> {
        Ok(self.system(u)?.matrix)
    }

    fn check(&self, u: &MixedSolution) -> Result<()> {
        if u.velocity.len() != self.spaces.n_velocity() || u.pressure.len() != self.spaces.n_pressure() {
            return Err(Error::Dimension(format!(
                "solution has {}+{} dofs, spaces have {}+{}",
                u.velocity.len(),
                u.pressure.len(),
                self.spaces.n_velocity(),
                self.spaces.n_pressure()
            )));
        }
        Ok(())
    }

    fn assemble(&self, u: &MixedSolution, mut jac: Option<&mut Triplets>) -> Result<Vec<f64>> {
        self.check(u)?;
        let tables = Tables::new(self.spaces, self.tables_degree)?;
        let vs = &self.spaces.velocity;
        let ps = &self.spaces.pressure;
        let ns = vs.n_scalar_dofs();
        let nv = vs.n_dofs();
        let np = ps.n_dofs();
        let lam_idx = nv + np;
        let nl = vs.n_local();
        let nl2 = 2 * nl;
        let conv = if self.convection { 0.5 } else { 0.0 };

        let mut res = vec![0.0; nv + np + 1];
        let mut gidx = [0usize; 12];
        let mut rv = [0.0; 12];
        let mut rq = [0.0; 3];
        let mut kvv = [[0.0; 12]; 12];
        let mut kvq = [[0.0; 3]; 12];
        let mut kql = [0.0; 3];

        for t in 0..self.mesh.n_triangles() {
            let geo = self.mesh.geometry(t);
            let inv_t = geo.inverse_jacobian.transpose();
            let scale = 2.0 * geo.area;
            let p_t = self.exponent.on(t);
            let vd = vs.element_dofs(t);
            let pd = ps.element_dofs(t);
            for c in 0..2 {
                for a in 0..nl {
                    gidx[c * nl + a] = c * ns + vd[a];
                }
            }
            let coef = |c: usize, a: usize| u.velocity[c * ns + vd[a]];
            let qloc = [u.pressure[pd[0]], u.pressure[pd[1]], u.pressure[pd[2]]];

            rv[..nl2].fill(0.0);
            rq.fill(0.0);
            let mut rl = 0.0;
            if jac.is_some() {
                for row in kvv.iter_mut().take(nl2) {
                    row[..nl2].fill(0.0);
                }
                for row in kvq.iter_mut().take(nl2) {
                    row.fill(0.0);
                }
                kql.fill(0.0);
            }

            for q in 0..tables.rule.len() {
                let w = tables.rule.weights()[q] * scale;
                let phi = &tables.velocity.values[q];
                let g = physical_gradients(&tables.velocity, q, &inv_t);
                let psi = &tables.pressure.values[q];

                let mut v = Vector2::zeros();
                let mut grad = Tensor2::zeros();
                for a in 0..nl {
                    let (vx, vy) = (coef(0, a), coef(1, a));
                    v.x += vx * phi[a];
                    v.y += vy * phi[a];
                    grad[(0, 0)] += vx * g[a].x;
                    grad[(0, 1)] += vx * g[a].y;
                    grad[(1, 0)] += vy * g[a].x;
                    grad[(1, 1)] += vy * g[a].y;
                }
                let div = grad[(0, 0)] + grad[(1, 1)];
                let qv = qloc[0] * psi[0] + qloc[1] * psi[1] + qloc[2] * psi[2];
                let s = self.law.stress(p_t, &grad);
                let gv = grad * v;

                for c in 0..2 {
                    for a in 0..nl {
                        let ga = [g[a].x, g[a].y];
                        let mut r = s[(c, 0)] * ga[0] + s[(c, 1)] * ga[1] - qv * ga[c];
                        r += conv * (phi[a] * gv[c] - v[c] * g[a].dot(&v));
                        rv[c * nl + a] += w * r;
                    }
                }
                for k in 0..3 {
                    rq[k] += w * (u.multiplier - div) * psi[k];
                }
                rl += w * qv;

                if jac.is_some() {
                    let tan = self.law.stress_jacobian(p_t, &grad);
                    let (iso, r1, dir) = tan.parts();
                    // D : (e_d (x) G_b) for every local velocity basis function
                    let mut dproj = [0.0; 12];
                    for d in 0..2 {
                        for b in 0..nl {
                            dproj[d * nl + b] = dir[(d, 0)] * g[b].x + dir[(d, 1)] * g[b].y;
                        }
                    }
                    for c in 0..2 {
                        for a in 0..nl {
                            let i = c * nl + a;
                            let ga = [g[a].x, g[a].y];
                            for d in 0..2 {
                                for b in 0..nl {
                                    let j = d * nl + b;
                                    let gb = [g[b].x, g[b].y];
                                    let delta = if c == d { 1.0 } else { 0.0 };
                                    let mut k = iso * 0.5 * (delta * g[a].dot(&g[b]) + ga[d] * gb[c])
                                        + r1 * dproj[i] * dproj[j];
                                    if conv != 0.0 {
                                        k += conv
                                            * (phi[a] * grad[(c, d)] * phi[b] - v[c] * ga[d] * phi[b]
                                                + delta * (phi[a] * g[b].dot(&v) - phi[b] * g[a].dot(&v)));
                                    }
                                    kvv[i][j] += w * k;
                                }
                            }
                            for kk in 0..3 {
                                kvq[i][kk] -= w * psi[kk] * ga[c];
                            }
                        }
                    }
                    for kk in 0..3 {
                        kql[kk] += w * psi[kk];
                    }
                }
            }

            for i in 0..nl2 {
                res[gidx[i]] += rv[i];
            }
            for k in 0..3 {
                res[nv + pd[k]] += rq[k];
            }
            res[lam_idx] += rl;

            if let Some(trip) = jac.as_deref_mut() {
                for i in 0..nl2 {
                    for j in 0..nl2 {
                        trip.push(gidx[i], gidx[j], kvv[i][j]);
                    }
                    for k in 0..3 {
                        trip.push(gidx[i], nv + pd[k], kvq[i][k]);
                        trip.push(nv + pd[k], gidx[i], kvq[i][k]);
                    }
                }
                for k in 0..3 {
                    trip.push(nv + pd[k], lam_idx, kql[k]);
                    trip.push(lam_idx, nv + pd[k], kql[k]);
                }
            }
        }

        for (r, l) in res[..nv].iter_mut().zip(&self.load) {
            *r -= l;
        }
        for &d in &self.dirichlet {
            res[d] = 0.0;
        }
        Ok(res)
    }
}

/// Assembles `L(z) = int g0 . z + G1 : grad z` for every velocity basis
/// function, where `integrand(x)` returns `(g0, G1)`.
pub fn assemble_functional(
    mesh: &Triangulation,
    space: &FeSpace,
    degree: usize,
    integrand: impl Fn(&Point2) -> Result<(Vector2<f64>, Tensor2)>,
) -> Result<Vec<f64>> {
    if space.value_dim() != 2 {
        return Err(Error::Dimension("functional needs a vector space".into()));
    }
    let rule = quadrature::rule(degree)?;
    let table = BasisTable::new(space.family(), &rule);
    let ns = space.n_scalar_dofs();
    let nl = space.n_local();
    let mut out = vec![0.0; space.n_dofs()];
    for t in 0..mesh.n_triangles() {
        let geo = mesh.geometry(t);
        let inv_t = geo.inverse_jacobian.transpose();
        let scale = 2.0 * geo.area;
        let dofs = space.element_dofs(t);
        for q in 0..rule.len() {
            let w = rule.weights()[q] * scale;
            let x = geo.map(&rule.reference_point(q));
            let (g0, g1) = integrand(&x)?;
            let g = physical_gradients(&table, q, &inv_t);
            for a in 0..nl {
                let phi = table.values[q][a];
                for c in 0..2 {
                    let val = g0[c] * phi + g1[(c, 0)] * g[a].x + g1[(c, 1)] * g[a].y;
                    out[c * ns + dofs[a]] += w * val;
                }
            }
        }
    }
    Ok(out)
}

/// Load vector `(f, z)` of a body force.
pub fn load_vector(
    mesh: &Triangulation,
    space: &FeSpace,
    degree: usize,
    f: impl Fn(&Point2) -> Vector2<f64>,
) -> Result<Vec<f64>> {
    assemble_functional(mesh, space, degree, |x| Ok((f(x), Tensor2::zeros())))
}

/// Skew convective form `b(u, w, z) = 1/2 (z (x) u, grad w) - 1/2 (w (x) u, grad z)`
/// for three discrete velocity fields.
pub fn convective_form(
    mesh: &Triangulation,
    space: &FeSpace,
    u: &[f64],
    w: &[f64],
    z: &[f64],
    degree: usize,
) -> Result<f64> {
    let rule = quadrature::rule(degree)?;
    let table = BasisTable::new(space.family(), &rule);
    let ns = space.n_scalar_dofs();
    let nl = space.n_local();
    let mut total = 0.0;
    for t in 0..mesh.n_triangles() {
        let geo = mesh.geometry(t);
        let inv_t = geo.inverse_jacobian.transpose();
        let scale = 2.0 * geo.area;
        let dofs = space.element_dofs(t);
        for q in 0..rule.len() {
            let wq = rule.weights()[q] * scale;
            let g = physical_gradients(&table, q, &inv_t);
            let phi = &table.values[q];
            let field = |f: &[f64]| {
                let mut v = Vector2::zeros();
                let mut grad = Tensor2::zeros();
                for a in 0..nl {
                    for c in 0..2 {
                        let coef = f[c * ns + dofs[a]];
                        v[c] += coef * phi[a];
                        grad[(c, 0)] += coef * g[a].x;
                        grad[(c, 1)] += coef * g[a].y;
                    }
                }
                (v, grad)
            };
            let (uv, _) = field(u);
            let (wv, wg) = field(w);
            let (zv, zg) = field(z);
            total += wq * 0.5 * (zv.dot(&(wg * uv)) - wv.dot(&(zg * uv)));
        }
    }
    Ok(total)
}

/// Integral of every pressure basis function.
pub fn pressure_integrals(mesh: &Triangulation, space: &FeSpace) -> Vec<f64> {
    let mut out = vec![0.0; space.n_dofs()];
    for t in 0..mesh.n_triangles() {
        let area = mesh.geometry(t).area;
        let dofs = space.element_dofs(t);
        for &d in dofs {
            out[d] += area / dofs.len() as f64;
        }
    }
    out
}

/// Largest `|(div v_h, r)|` over pressure basis functions `r`.
pub fn divergence_defect(mesh: &Triangulation, spaces: &MixedSpaces, velocity: &[f64]) -> Result<f64> {
    let rule = quadrature::rule(spaces.pair.assembly_degree())?;
    let vt = BasisTable::new(spaces.velocity.family(), &rule);
    let pt = BasisTable::new(spaces.pressure.family(), &rule);
    let vs = &spaces.velocity;
    let ns = vs.n_scalar_dofs();
    let mut acc = vec![0.0; spaces.n_pressure()];
    for t in 0..mesh.n_triangles() {
        let geo = mesh.geometry(t);
        let inv_t = geo.inverse_jacobian.transpose();
        let scale = 2.0 * geo.area;
        let vd = vs.element_dofs(t);
        let pd = spaces.pressure.element_dofs(t);
        for q in 0..rule.len() {
            let w = rule.weights()[q] * scale;
            let g = physical_gradients(&vt, q, &inv_t);
            let div: f64 = (0..vs.n_local())
                .map(|a| velocity[vd[a]] * g[a].x + velocity[ns + vd[a]] * g[a].y)
                .sum();
            for k in 0..3 {
                acc[pd[k]] += w * div * pt.values[q][k];
            }
        }
    }
    Ok(acc.iter().fold(0.0, |m: f64, v| m.max(v.abs())))
}

/// Integral mean of a pressure field over the mesh.
pub fn pressure_mean(mesh: &Triangulation, space: &FeSpace, pressure: &[f64]) -> f64 {
    let w = pressure_integrals(mesh, space);
    let total: f64 = w.iter().zip(pressure).map(|(a, b)| a * b).sum();
    total / mesh.total_area()
}
