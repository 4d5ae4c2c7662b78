//! Variable power-law exponents and the (p, delta)-structured stress law.
//!
//! Pointwise maps take the exponent value as a plain `f64`, so the same code
//! serves the continuous law (`p(x)`) and its barycenter-frozen counterpart
//! (`p(xi_T)`).

use std::fmt;
use std::sync::Arc;

use nalgebra::Matrix2;

use crate::error::{Error, Result};
use crate::mesh::{Point2, Triangulation};

pub type Tensor2 = Matrix2<f64>;

/// Strain magnitude below which the rank-one part of the stress tangent is
/// dropped.
pub const TANGENT_RANK_ONE_CUTOFF: f64 = 1e-12;

pub fn sym(a: &Tensor2) -> Tensor2 {
    (a + a.transpose()) * 0.5
}

/// Frobenius contraction `A : B`.
pub fn contract(a: &Tensor2, b: &Tensor2) -> f64 {
    a.component_mul(b).sum()
}

/// Hoelder conjugate `p / (p - 1)`.
pub fn p_conjugate(p: f64) -> Result<f64> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::Domain(format!("conjugate exponent needs p > 1, got {p}")));
    }
    Ok(p / (p - 1.0))
}

// Callers guarantee p > 1.
fn conj(p: f64) -> f64 {
    p / (p - 1.0)
}

type ExponentFn = Arc<dyn Fn(&Point2) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Rule {
    Constant(f64),
    /// `(1 - |x|^a / 2^{a/2}) p_plus + |x|^a / 2^{a/2} p_minus`
    Academic,
    Custom(ExponentFn),
}

/// A spatially varying exponent `x -> p(x)` with known bounds.
#[derive(Clone)]
pub struct ExponentField {
    rule: Rule,
    p_minus: f64,
    p_plus: f64,
    alpha: f64,
}

impl fmt::Debug for ExponentField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.rule {
            Rule::Constant(_) => "constant",
            Rule::Academic => "academic",
            Rule::Custom(_) => "custom",
        };
        f.debug_struct("ExponentField")
            .field("kind", &kind)
            .field("p_minus", &self.p_minus)
            .field("p_plus", &self.p_plus)
            .field("alpha", &self.alpha)
            .finish()
    }
}

impl ExponentField {
    pub fn constant(p: f64) -> Result<Self> {
        if !(p > 1.0) {
            return Err(Error::Domain(format!("exponent must exceed 1, got {p}")));
        }
        Ok(Self { rule: Rule::Constant(p), p_minus: p, p_plus: p, alpha: 1.0 })
    }

    /// The radially decreasing exponent of the convergence experiments:
    /// `p_plus` at the origin, `p_minus` at (1,1).
    pub fn academic(alpha: f64, p_minus: f64, p_plus: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::Domain(format!("alpha must lie in (0,1], got {alpha}")));
        }
        if !(p_minus > 1.0 && p_minus <= p_plus) {
            return Err(Error::Domain(format!(
                "need 1 < p_minus <= p_plus, got {p_minus}, {p_plus}"
            )));
        }
        Ok(Self { rule: Rule::Academic, p_minus, p_plus, alpha })
    }

    /// Wraps an arbitrary rule; `p_minus`/`p_plus` are trusted bounds.
    pub fn from_fn(
        f: impl Fn(&Point2) -> f64 + Send + Sync + 'static,
        p_minus: f64,
        p_plus: f64,
        alpha: f64,
    ) -> Result<Self> {
        if !(p_minus > 1.0 && p_minus <= p_plus) {
            return Err(Error::Domain(format!(
                "need 1 < p_minus <= p_plus, got {p_minus}, {p_plus}"
            )));
        }
        Ok(Self { rule: Rule::Custom(Arc::new(f)), p_minus, p_plus, alpha })
    }

    pub fn p_minus(&self) -> f64 {
        self.p_minus
    }

    pub fn p_plus(&self) -> f64 {
        self.p_plus
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    fn academic_weight(&self, x: &Point2) -> f64 {
        x.norm().powf(self.alpha) / 2f64.powf(self.alpha / 2.0)
    }

    pub fn eval(&self, x: &Point2) -> f64 {
        match &self.rule {
            Rule::Constant(p) => *p,
            Rule::Academic => {
                let w = self.academic_weight(x);
                (1.0 - w) * self.p_plus + w * self.p_minus
            }
            Rule::Custom(f) => f(x),
        }
    }

    /// Spatial gradient, where available in closed form.
    ///
    /// The academic exponent is not differentiable at the origin for
    /// `alpha < 1`; `None` is returned there.
    pub fn gradient(&self, x: &Point2) -> Option<Point2> {
        match &self.rule {
            Rule::Constant(_) => Some(Point2::zeros()),
            Rule::Academic => {
                let r = x.norm();
                if r == 0.0 {
                    return None;
                }
                let dw_dr = self.alpha * r.powf(self.alpha - 1.0) / 2f64.powf(self.alpha / 2.0);
                Some(x / r * (-(self.p_plus - self.p_minus) * dw_dr))
            }
            Rule::Custom(_) => None,
        }
    }
}

/// Element-wise constant exponent `p_h|_T = p(xi_T)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteExponent {
    values: Vec<f64>,
}

impl DiscreteExponent {
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if let Some(p) = values.iter().find(|&&p| !(p > 1.0)) {
            return Err(Error::Domain(format!("frozen exponent must exceed 1, got {p}")));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn on(&self, t: usize) -> f64 {
        self.values[t]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// The conjugate exponent on every element.
    pub fn conjugate(&self) -> Self {
        Self { values: self.values.iter().map(|&p| conj(p)).collect() }
    }
}

/// Samples `p` at element barycenters.
pub fn freeze(p: &ExponentField, mesh: &Triangulation) -> DiscreteExponent {
    let values = (0..mesh.n_triangles()).map(|t| p.eval(&mesh.geometry(t).barycenter)).collect();
    DiscreteExponent { values }
}

/// `S(x, A) = mu0 (delta + |A^sym|)^{p(x)-2} A^sym` and related maps.
#[derive(Debug, Clone)]
pub struct StressLaw {
    pub exponent: ExponentField,
    delta: f64,
    mu0: f64,
}

/// Linearization of the stress at a fixed strain; applies `D_A S(A)[B]`.
#[derive(Debug, Clone, Copy)]
pub struct StressTangent {
    isotropic: f64,
    rank_one: f64,
    direction: Tensor2,
}

impl StressTangent {
    pub fn apply(&self, b: &Tensor2) -> Tensor2 {
        let bs = sym(b);
        bs * self.isotropic + self.direction * (self.rank_one * contract(&self.direction, &bs))
    }

    /// `(isotropic, rank_one, direction)` with
    /// `D_A S[B] = isotropic B^sym + rank_one (direction : B^sym) direction`.
    pub fn parts(&self) -> (f64, f64, Tensor2) {
        (self.isotropic, self.rank_one, self.direction)
    }

    /// Dense 4th-order tensor `T[i][j][k][l] = d S_ij / d A_kl`.
    pub fn to_tensor(&self) -> [[[[f64; 2]; 2]; 2]; 2] {
        let mut t = [[[[0.0; 2]; 2]; 2]; 2];
        for k in 0..2 {
            for l in 0..2 {
                let mut e = Tensor2::zeros();
                e[(k, l)] = 1.0;
                let col = self.apply(&e);
                for i in 0..2 {
                    for j in 0..2 {
                        t[i][j][k][l] = col[(i, j)];
                    }
                }
            }
        }
        t
    }
}

impl StressLaw {
    pub fn new(exponent: ExponentField, delta: f64, mu0: f64) -> Result<Self> {
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(Error::Domain(format!("delta must be >= 0, got {delta}")));
        }
        if !(mu0 > 0.0) || !mu0.is_finite() {
            return Err(Error::Domain(format!("mu0 must be > 0, got {mu0}")));
        }
        Ok(Self { exponent, delta, mu0 })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn mu0(&self) -> f64 {
        self.mu0
    }

    /// `(delta + |A^sym|)^{e} A^sym`, with the zero-strain limit taken as 0.
    fn scaled(&self, shift: f64, exponent: f64, a: &Tensor2) -> Tensor2 {
        let s = sym(a);
        let n = s.norm();
        if n == 0.0 {
            return Tensor2::zeros();
        }
        s * (shift + n).powf(exponent)
    }

    pub fn stress(&self, p: f64, a: &Tensor2) -> Tensor2 {
        self.scaled(self.delta, p - 2.0, a) * self.mu0
    }

    pub fn f_map(&self, p: f64, a: &Tensor2) -> Tensor2 {
        self.scaled(self.delta, (p - 2.0) / 2.0, a)
    }

    pub fn f_star_map(&self, p: f64, a: &Tensor2) -> Tensor2 {
        let pc = conj(p);
        self.scaled(self.delta.powf(p - 1.0), (pc - 2.0) / 2.0, a)
    }

    pub fn stress_at(&self, x: &Point2, a: &Tensor2) -> Tensor2 {
        self.stress(self.exponent.eval(x), a)
    }

    pub fn f_map_at(&self, x: &Point2, a: &Tensor2) -> Tensor2 {
        self.f_map(self.exponent.eval(x), a)
    }

    pub fn f_star_map_at(&self, x: &Point2, a: &Tensor2) -> Tensor2 {
        self.f_star_map(self.exponent.eval(x), a)
    }

    /// `D_A S(A) = mu0 [(delta+|A|)^{p-2} P_sym
    ///   + (p-2)(delta+|A|)^{p-3} (A^sym (x) A^sym) / |A^sym|]`.
    pub fn stress_jacobian(&self, p: f64, a: &Tensor2) -> StressTangent {
        let s = sym(a);
        let n = s.norm();
        let base = self.delta + n;
        if n < TANGENT_RANK_ONE_CUTOFF {
            let isotropic = if base == 0.0 { 0.0 } else { self.mu0 * base.powf(p - 2.0) };
            return StressTangent { isotropic, rank_one: 0.0, direction: Tensor2::zeros() };
        }
        StressTangent {
            isotropic: self.mu0 * base.powf(p - 2.0),
            rank_one: self.mu0 * (p - 2.0) * base.powf(p - 3.0) * n,
            direction: s / n,
        }
    }
}

/// Closed-form equivalent of the shifted N-function:
/// `phi_a(t) ~ (delta + a + t)^{p-2} t^2`.
pub fn shifted_phi(p: f64, delta: f64, a: f64, t: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    (delta + a + t).powf(p - 2.0) * t * t
}

/// Closed-form equivalent of the conjugate shifted N-function:
/// `(phi_a)^*(t) ~ ((delta + a)^{p-1} + t)^{p'-2} t^2`.
pub fn shifted_phi_conj(p: f64, delta: f64, a: f64, t: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    ((delta + a).powf(p - 1.0) + t).powf(conj(p) - 2.0) * t * t
}
