//! Symmetric Gauss rules on the reference triangle (0,0), (1,0), (0,1).
//!
//! Rules are stored as symmetry orbits in barycentric coordinates with
//! weights normalized to sum 1; the reference area 1/2 is applied when a
//! rule is built. All rules have positive weights and interior points.

use crate::error::{Error, Result};
use crate::mesh::{ElementGeometry, Point2};

pub const MAX_DEGREE: usize = 10;

/// Orbit description: optional centroid weight, `(a, w)` for the three
/// points `(a, a, 1-2a)`, and `(a, b, w)` for the six permutations of
/// `(a, b, 1-a-b)`.
struct Orbits {
    degree: usize,
    centroid: Option<f64>,
    s21: &'static [(f64, f64)],
    s111: &'static [(f64, f64, f64)],
}

const TABLE: &[Orbits] = &[
    Orbits { degree: 1, centroid: Some(1.0), s21: &[], s111: &[] },
    Orbits {
        degree: 2,
        centroid: None,
        s21: &[(0.16666666666666666667, 0.33333333333333333333)],
        s111: &[],
    },
    Orbits {
        degree: 4,
        centroid: None,
        s21: &[
            (0.44594849091596488632, 0.22338158967801146570),
            (0.09157621350977074346, 0.10995174365532186764),
        ],
        s111: &[],
    },
    Orbits {
        degree: 5,
        centroid: Some(0.22499999999999958386),
        s21: &[
            (0.47014206410511502605, 0.13239415278850634337),
            (0.10128650732345632688, 0.12593918054482712956),
        ],
        s111: &[],
    },
    Orbits {
        degree: 6,
        centroid: None,
        s21: &[
            (0.06308901449150222834, 0.050844906370206816921),
            (0.24928674517091042129, 0.11678627572637936603),
        ],
        s111: &[(0.31035245103378440542, 0.63650249912139864723, 0.082851075618373575194)],
    },
    Orbits {
        degree: 8,
        centroid: Some(0.14431560767778687516),
        s21: &[
            (0.17056930775176012089, 0.10321737053471805558),
            (0.45929258829272301416, 0.095091634267284792467),
            (0.050547228317030953093, 0.032458497623198063668),
        ],
        s111: &[(0.26311282963463822783, 0.7284923929554040689, 0.027230314174435065233)],
    },
    Orbits {
        degree: 9,
        centroid: Some(0.097135796282816921523),
        s21: &[
            (0.18820353561903709832, 0.079647738927210255937),
            (0.044729513394452281787, 0.02557767565869755022),
            (0.43708959149294948456, 0.077827541004780154119),
            (0.48968251919874573541, 0.031334700227124264531),
        ],
        s111: &[(0.74119859878449844114, 0.22196298916076339813, 0.043283539377291067533)],
    },
    Orbits {
        degree: 10,
        centroid: Some(0.090817990382761333931),
        s21: &[
            (0.10948157548503520879, 0.04532105943552686665),
            (0.48557763338365981695, 0.036725957756463358618),
        ],
        s111: &[
            (0.24667256063989734252, 0.025003534762684698093, 0.028327242531055827956),
            (0.55035294182100474559, 0.14170721941487300457, 0.072757916845423139298),
            (0.0095408154002996427141, 0.066803251012198110699, 0.0094216669637323646352),
        ],
    },
];

/// A quadrature rule on the reference triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    points: Vec<[f64; 3]>,
    weights: Vec<f64>,
    degree: usize,
}

impl QuadratureRule {
    fn from_orbits(o: &Orbits) -> Self {
        let mut points = Vec::new();
        let mut weights = Vec::new();
        if let Some(w) = o.centroid {
            points.push([1.0 / 3.0; 3]);
            weights.push(w);
        }
        for &(a, w) in o.s21 {
            let b = 1.0 - 2.0 * a;
            for p in [[a, a, b], [a, b, a], [b, a, a]] {
                points.push(p);
                weights.push(w);
            }
        }
        for &(a, b, w) in o.s111 {
            let c = 1.0 - a - b;
            for p in [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]] {
                points.push(p);
                weights.push(w);
            }
        }
        for w in &mut weights {
            *w *= 0.5;
        }
        Self { points, weights, degree: o.degree }
    }

    /// Barycentric coordinates `[l0, l1, l2]`; the reference point is `(l1, l2)`.
    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Exactness degree.
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Reference coordinates of point `q`.
    pub fn reference_point(&self, q: usize) -> Point2 {
        Point2::new(self.points[q][1], self.points[q][2])
    }
}

/// The cheapest shipped rule exact to at least `degree`.
pub fn rule(degree: usize) -> Result<QuadratureRule> {
    if degree > MAX_DEGREE {
        return Err(Error::Unsupported(format!(
            "quadrature degree {degree} exceeds {MAX_DEGREE}"
        )));
    }
    let o = TABLE
        .iter()
        .find(|o| o.degree >= degree.max(1))
        .expect("table covers every degree up to the maximum");
    Ok(QuadratureRule::from_orbits(o))
}

/// Physical points and weights of `rule` on one element. Weights sum to
/// the element area.
pub fn map_to_element(rule: &QuadratureRule, geo: &ElementGeometry) -> Result<Vec<(Point2, f64)>> {
    if !(geo.area > 0.0) {
        return Err(Error::InvalidMesh(format!(
            "degenerate element {} (area {})",
            geo.triangle, geo.area
        )));
    }
    let scale = 2.0 * geo.area;
    Ok((0..rule.len())
        .map(|q| (geo.map(&rule.reference_point(q)), rule.weights[q] * scale))
        .collect())
}
