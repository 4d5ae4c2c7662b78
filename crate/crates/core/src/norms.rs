//! Variable-exponent modulars, Luxemburg norms and the error measures of
//! the convergence study.

use crate::error::{Error, Result};
use crate::exponent::{DiscreteExponent, ExponentField, StressLaw, Tensor2};
use crate::mesh::{Point2, Triangulation};
use crate::quadrature;
use crate::spaces::{eval_basis, FeSpace};

/// Relative bracket width at which the Luxemburg bisection stops.
pub const LUXEMBURG_RTOL: f64 = 1e-10;

/// Where the exponent of a modular comes from.
#[derive(Debug, Clone, Copy)]
pub enum ExponentSource<'a> {
    Constant(f64),
    /// Evaluated at every quadrature point.
    Field(&'a ExponentField),
    /// One value per element.
    Frozen(&'a DiscreteExponent),
}

impl ExponentSource<'_> {
    fn at(&self, t: usize, x: &Point2) -> f64 {
        match self {
            ExponentSource::Constant(p) => *p,
            ExponentSource::Field(f) => f.eval(x),
            ExponentSource::Frozen(d) => d.on(t),
        }
    }
}

/// A function sampled at quadrature points: `(weight, |f|, exponent)`.
/// Modulars and Luxemburg norms of the sampled function are exact sums
/// over the samples.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Samples {
    entries: Vec<(f64, f64, f64)>,
}

impl Samples {
    /// Samples `|f|` on every element with a rule exact to `degree`.
    /// `f(t, x, xi)` receives the element, physical and reference point.
    pub fn collect(
        mesh: &Triangulation,
        exponent: ExponentSource<'_>,
        degree: usize,
        f: impl Fn(usize, &Point2, &Point2) -> f64,
    ) -> Result<Self> {
        let elements: Vec<usize> = (0..mesh.n_triangles()).collect();
        Self::collect_on(mesh, &elements, exponent, degree, f)
    }

    /// As [`Samples::collect`], restricted to `elements`.
    pub fn collect_on(
        mesh: &Triangulation,
        elements: &[usize],
        exponent: ExponentSource<'_>,
        degree: usize,
        f: impl Fn(usize, &Point2, &Point2) -> f64,
    ) -> Result<Self> {
        let rule = quadrature::rule(degree)?;
        let mut entries = Vec::with_capacity(elements.len() * rule.len());
        for &t in elements {
            let geo = mesh.geometry(t);
            for (q, (x, w)) in quadrature::map_to_element(&rule, &geo)?.into_iter().enumerate() {
                let xi = rule.reference_point(q);
                entries.push((w, f(t, &x, &xi).abs(), exponent.at(t, &x)));
            }
        }
        Ok(Self { entries })
    }

    pub fn from_entries(entries: Vec<(f64, f64, f64)>) -> Self {
        Self { entries }
    }

    /// `rho(f / lambda) = sum w |f/lambda|^p`.
    pub fn modular_scaled(&self, lambda: f64) -> f64 {
        self.entries
            .iter()
            .filter(|e| e.1 > 0.0)
            .map(|&(w, a, p)| w * (a / lambda).powf(p))
            .sum()
    }

    pub fn modular(&self) -> f64 {
        self.modular_scaled(1.0)
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|e| e.1 == 0.0)
    }

    /// `inf { lambda > 0 : rho(f / lambda) <= 1 }` by bisection.
    pub fn luxemburg(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        // rho(f/lambda) <= rho(f)/lambda for lambda >= 1, so hi is feasible
        let mut hi = self.modular().max(1.0) + 1.0;
        while self.modular_scaled(hi) > 1.0 {
            hi *= 2.0;
        }
        let mut lo = hi;
        while self.modular_scaled(lo) <= 1.0 {
            lo *= 0.5;
        }
        while hi - lo > LUXEMBURG_RTOL * hi {
            let mid = 0.5 * (lo + hi);
            if self.modular_scaled(mid) <= 1.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }
}

/// `int |f|^p` over the mesh.
pub fn modular(
    mesh: &Triangulation,
    exponent: ExponentSource<'_>,
    degree: usize,
    f: impl Fn(usize, &Point2, &Point2) -> f64,
) -> Result<f64> {
    Ok(Samples::collect(mesh, exponent, degree, f)?.modular())
}

/// Luxemburg norm of `f` over the mesh.
pub fn luxemburg_norm(
    mesh: &Triangulation,
    exponent: ExponentSource<'_>,
    degree: usize,
    f: impl Fn(usize, &Point2, &Point2) -> f64,
) -> Result<f64> {
    Ok(Samples::collect(mesh, exponent, degree, f)?.luxemburg())
}

/// Symmetric gradient of a discrete velocity at reference point `xi` of `t`.
pub fn discrete_sym_gradient(
    mesh: &Triangulation,
    space: &FeSpace,
    dofs: &[f64],
    t: usize,
    xi: &Point2,
) -> Tensor2 {
    let inv_t = mesh.geometry(t).inverse_jacobian.transpose();
    let (_, g) = eval_basis(space.family(), xi);
    let ns = space.n_scalar_dofs();
    let mut grad = Tensor2::zeros();
    for (a, &d) in space.element_dofs(t).iter().enumerate() {
        let pg = inv_t * g[a];
        for c in 0..2 {
            grad[(c, 0)] += dofs[c * ns + d] * pg.x;
            grad[(c, 1)] += dofs[c * ns + d] * pg.y;
        }
    }
    crate::exponent::sym(&grad)
}

/// `e_v = || F_h(Dv_h) - F_h(Dv) ||_2` with the frozen exponent.
pub fn error_velocity(
    mesh: &Triangulation,
    law: &StressLaw,
    exponent: &DiscreteExponent,
    space: &FeSpace,
    velocity: &[f64],
    exact_gradient: impl Fn(&Point2) -> Result<Tensor2>,
    degree: usize,
) -> Result<f64> {
    let rule = quadrature::rule(degree)?;
    let mut sum = 0.0;
    for t in 0..mesh.n_triangles() {
        let geo = mesh.geometry(t);
        let p = exponent.on(t);
        for (q, (x, w)) in quadrature::map_to_element(&rule, &geo)?.into_iter().enumerate() {
            let dh = discrete_sym_gradient(mesh, space, velocity, t, &rule.reference_point(q));
            let d = exact_gradient(&x)?;
            let diff = law.f_map(p, &dh) - law.f_map(p, &d);
            sum += w * diff.norm_squared();
        }
    }
    Ok(sum.sqrt())
}

/// `sum_T || q_h - P0 q ||_{L^{p'(xi_T)}(T)}` where `P0 q` is the element
/// mean of the exact pressure. `conjugate` holds `p'` per element.
///
/// Each term carries the linear part of `q_h` on a single element, so the
/// sum behaves like `h^{2/p' - 1}` even for smooth pressures.
pub fn error_pressure_localized(
    mesh: &Triangulation,
    conjugate: &DiscreteExponent,
    space: &FeSpace,
    pressure: &[f64],
    exact: impl Fn(&Point2) -> f64,
    degree: usize,
) -> Result<f64> {
    let rule = quadrature::rule(degree)?;
    let mut total = 0.0;
    for t in 0..mesh.n_triangles() {
        let geo = mesh.geometry(t);
        let pts = quadrature::map_to_element(&rule, &geo)?;
        let mean = pts.iter().map(|(x, w)| w * exact(x)).sum::<f64>() / geo.area;
        let p = conjugate.on(t);
        let dofs = space.element_dofs(t);
        let mut acc = 0.0;
        for (q, (_, w)) in pts.iter().enumerate() {
            let (v, _) = eval_basis(space.family(), &rule.reference_point(q));
            let qh: f64 = dofs.iter().zip(v).map(|(&d, b)| pressure[d] * b).sum();
            let e = (qh - mean).abs();
            if e > 0.0 {
                acc += w * e.powf(p);
            }
        }
        total += acc.powf(1.0 / p);
    }
    Ok(total)
}

/// Element means of `f` computed with a rule exact to `degree`.
pub fn element_means(mesh: &Triangulation, degree: usize, f: impl Fn(&Point2) -> f64) -> Result<Vec<f64>> {
    let rule = quadrature::rule(degree)?;
    (0..mesh.n_triangles())
        .map(|t| {
            let geo = mesh.geometry(t);
            let pts = quadrature::map_to_element(&rule, &geo)?;
            Ok(pts.iter().map(|(x, w)| w * f(x)).sum::<f64>() / geo.area)
        })
        .collect()
}

/// `|| q_h - P0 q ||_{p'_h}`: discrete Luxemburg norm of the distance to
/// the element means of the exact pressure. This is the pressure error
/// reported by the convergence study; unlike the element-wise sum above it
/// decays like `h` for smooth pressures.
pub fn error_pressure_projected(
    mesh: &Triangulation,
    conjugate: &DiscreteExponent,
    space: &FeSpace,
    pressure: &[f64],
    exact: impl Fn(&Point2) -> f64,
    degree: usize,
) -> Result<f64> {
    let means = element_means(mesh, degree, exact)?;
    luxemburg_norm(mesh, ExponentSource::Frozen(conjugate), degree, |t, _, xi| {
        let (v, _) = eval_basis(space.family(), xi);
        let qh: f64 = space.element_dofs(t).iter().zip(v).map(|(&d, b)| pressure[d] * b).sum();
        qh - means[t]
    })
}

/// `||q_h||_{p'_h} + ||Dv_h||_{p_h}` over the whole mesh.
pub fn stability_proxy(
    mesh: &Triangulation,
    exponent: &DiscreteExponent,
    velocity_space: &FeSpace,
    velocity: &[f64],
    pressure_space: &FeSpace,
    pressure: &[f64],
    degree: usize,
) -> Result<f64> {
    let conj = exponent.conjugate();
    let q = luxemburg_norm(mesh, ExponentSource::Frozen(&conj), degree, |t, _, xi| {
        let (v, _) = eval_basis(pressure_space.family(), xi);
        pressure_space.element_dofs(t).iter().zip(v).map(|(&d, b)| pressure[d] * b).sum()
    })?;
    let dv = luxemburg_norm(mesh, ExponentSource::Frozen(exponent), degree, |t, _, xi| {
        discrete_sym_gradient(mesh, velocity_space, velocity, t, xi).norm()
    })?;
    Ok(q + dv)
}

/// Experimental orders `log(e_i / e_{i-1}) / log(h_i / h_{i-1})`. The first
/// entry and entries touching a non-positive error are `None`.
pub fn eoc(errors: &[f64], h: &[f64]) -> Result<Vec<Option<f64>>> {
    if errors.len() != h.len() {
        return Err(Error::Dimension(format!("{} errors for {} mesh sizes", errors.len(), h.len())));
    }
    let mut out = vec![None; errors.len()];
    for i in 1..errors.len() {
        let (e0, e1) = (errors[i - 1], errors[i]);
        let (h0, h1) = (h[i - 1], h[i]);
        if e0 > 0.0 && e1 > 0.0 && h0 > 0.0 && h1 > 0.0 && h0 != h1 {
            out[i] = Some((e1 / e0).ln() / (h1 / h0).ln());
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Quantity {
    Velocity,
    Pressure,
}

/// Regularity case of the manufactured solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Case {
    /// Pressure regularity tied to `p'`.
    One,
    /// Pressure regularity tied to `F(Dv)`.
    Two,
}

impl Case {
    pub fn from_index(i: u8) -> Result<Self> {
        match i {
            1 => Ok(Case::One),
            2 => Ok(Case::Two),
            _ => Err(Error::Config(format!("case must be 1 or 2, got {i}"))),
        }
    }

    pub fn index(self) -> u8 {
        match self {
            Case::One => 1,
            Case::Two => 2,
        }
    }
}

/// Predicted convergence rate.
///
/// Case 1: velocity `min{a, b, g min{1, (p+)'/2}}`, pressure twice that
/// divided by `(r-)'` with `r- = min{2, p-}`. Case 2: `min{a, b, g}` for both.
pub fn theory_rate(
    case: Case,
    quantity: Quantity,
    alpha: f64,
    beta: f64,
    gamma: f64,
    p_minus: f64,
    p_plus: f64,
) -> Result<f64> {
    let base = alpha.min(beta);
    match case {
        Case::Two => Ok(base.min(gamma)),
        Case::One => {
            let pc = crate::exponent::p_conjugate(p_plus)?;
            let v = base.min(gamma * (pc / 2.0).min(1.0));
            match quantity {
                Quantity::Velocity => Ok(v),
                Quantity::Pressure => {
                    let r = p_minus.min(2.0);
                    Ok(2.0 * v / crate::exponent::p_conjugate(r)?)
                }
            }
        }
    }
}
