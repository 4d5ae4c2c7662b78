//! Manufactured solutions, the convergence study and the
//! electro-rheological flow scenario.

use std::path::Path;

use nalgebra::Vector2;

use crate::assembly::{
    assemble_functional, load_vector, pressure_mean, set_dirichlet_values, DiscreteProblem, MixedSolution,
};
use crate::error::{Error, Result};
use crate::exponent::{freeze, p_conjugate, DiscreteExponent, ExponentField, StressLaw, Tensor2};
use crate::mesh::{Point2, Triangulation};
use crate::norms::{self, theory_rate, Case, Quantity};
use crate::solver::{prolong, solve_newton, NewtonConfig, NewtonReport};
use crate::spaces::{MixedPair, MixedSpaces};
use crate::vtk;

/// Quadrature degree of error integrals and the consistency functional.
pub const ERROR_DEGREE: usize = 10;
/// Shift added to both radial exponents.
pub const EPS_SHIFT: f64 = 1e-4;
pub const DEFAULT_DELTA: f64 = 1e-5;
pub const DEFAULT_MU0: f64 = 0.5;

/// Parameters of one column of the convergence tables.
#[derive(Debug, Clone)]
pub struct ManufacturedCase {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub p_minus: f64,
    pub p_plus: f64,
    pub case: Case,
    pub delta: f64,
    pub mu0: f64,
    exponent: ExponentField,
    mean_shift: f64,
}

impl ManufacturedCase {
    /// `p_plus = p_minus + 1`, `delta = 1e-5`, `mu0 = 1/2`.
    pub fn new(alpha: f64, beta: f64, gamma: f64, p_minus: f64, case: Case) -> Result<Self> {
        Self::with_law(alpha, beta, gamma, p_minus, case, DEFAULT_DELTA, DEFAULT_MU0)
    }

    pub fn with_law(
        alpha: f64,
        beta: f64,
        gamma: f64,
        p_minus: f64,
        case: Case,
        delta: f64,
        mu0: f64,
    ) -> Result<Self> {
        for (name, v) in [("beta", beta), ("gamma", gamma)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0,1], got {v}")));
            }
        }
        if !(delta >= 0.0) || !(mu0 > 0.0) {
            return Err(Error::Config(format!("need delta >= 0 and mu0 > 0, got {delta}, {mu0}")));
        }
        let p_plus = p_minus + 1.0;
        let exponent = ExponentField::academic(alpha, p_minus, p_plus).map_err(|e| Error::Config(e.to_string()))?;
        let mut this =
            Self { alpha, beta, gamma, p_minus, p_plus, case, delta, mu0, exponent, mean_shift: 0.0 };
        this.mean_shift = mean_over_unit_square(|r| this.rho_q_radial(r));
        Ok(this)
    }

    pub fn exponent(&self) -> &ExponentField {
        &self.exponent
    }

    pub fn law(&self) -> Result<StressLaw> {
        StressLaw::new(self.exponent.clone(), self.delta, self.mu0)
    }

    /// Mean of `|x|^{rho_q(x)}` over the unit square.
    pub fn mean_shift(&self) -> f64 {
        self.mean_shift
    }

    fn p_at_radius(&self, r: f64) -> f64 {
        self.exponent.eval(&Point2::new(r, 0.0))
    }

    fn rho_v_of_p(&self, p: f64) -> f64 {
        2.0 * (self.beta - 1.0) / p + EPS_SHIFT
    }

    fn rho_q_of_p(&self, p: f64) -> f64 {
        match self.case {
            Case::One => self.gamma - 2.0 / (p / (p - 1.0)) + EPS_SHIFT,
            Case::Two => self.rho_v_of_p(p) * (p - 2.0) / 2.0 + self.gamma - 1.0 + EPS_SHIFT,
        }
    }

    fn rho_q_radial(&self, r: f64) -> f64 {
        self.rho_q_of_p(self.p_at_radius(r))
    }

    pub fn rho_v(&self, x: &Point2) -> f64 {
        self.rho_v_of_p(self.exponent.eval(x))
    }

    pub fn rho_q(&self, x: &Point2) -> f64 {
        self.rho_q_of_p(self.exponent.eval(x))
    }

    /// `v(x) = |x|^{rho_v(x)} (x2, -x1)`.
    pub fn velocity(&self, x: &Point2) -> Vector2<f64> {
        let r = x.norm();
        if r == 0.0 {
            return Vector2::zeros();
        }
        Vector2::new(x.y, -x.x) * r.powf(self.rho_v(x))
    }

    /// `grad v` with entries `(i, j) = d v_i / d x_j`, including the
    /// derivative of the variable exponent.
    pub fn velocity_gradient(&self, x: &Point2) -> Result<Tensor2> {
        let r = x.norm();
        let grad_p = match self.exponent.gradient(x) {
            Some(g) if r > 0.0 => g,
            _ => return Err(Error::Domain("velocity gradient is singular at the origin".into())),
        };
        let p = self.exponent.eval(x);
        let rho = self.rho_v_of_p(p);
        let grad_rho = grad_p * (-2.0 * (self.beta - 1.0) / (p * p));
        let s = r.powf(rho);
        // grad of s = |x|^rho(x)
        let grad_s = (grad_rho * r.ln() + x * (rho / (r * r))) * s;
        let w = Vector2::new(x.y, -x.x);
        let grad_w = Tensor2::new(0.0, 1.0, -1.0, 0.0);
        Ok(w * grad_s.transpose() + grad_w * s)
    }

    /// `q(x) = |x|^{rho_q(x)} - mean`.
    pub fn pressure(&self, x: &Point2) -> f64 {
        let r = x.norm();
        let raw = if r == 0.0 {
            let rho = self.rho_q(x);
            if rho > 0.0 {
                0.0
            } else if rho == 0.0 {
                1.0
            } else {
                f64::INFINITY
            }
        } else {
            r.powf(self.rho_q(x))
        };
        raw - self.mean_shift
    }

    pub fn theory(&self, quantity: Quantity) -> Result<f64> {
        theory_rate(self.case, quantity, self.alpha, self.beta, self.gamma, self.p_minus, self.p_plus)
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
                p1 = x;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Mean of `|x|^{rho(|x|)}` over (0,1)^2 for a radial exponent.
///
/// Polar coordinates split the square into two triangles symmetric about
/// the diagonal; the radial variable is graded as `r = R s^8`, which makes
/// the integrand smooth for the exponents of the study.
pub fn mean_over_unit_square(rho: impl Fn(f64) -> f64) -> f64 {
    const GRADING: i32 = 8;
    const PANELS: usize = 8;
    let (gx, gw) = gauss_legendre(24);
    let quarter = std::f64::consts::FRAC_PI_4;
    let mut total = 0.0;
    for (&tx, &tw) in gx.iter().zip(&gw) {
        let theta = quarter * 0.5 * (tx + 1.0);
        let wt = quarter * 0.5 * tw;
        let rmax = 1.0 / theta.cos();
        let mut radial = 0.0;
        for k in 0..PANELS {
            let (a, b) = (k as f64 / PANELS as f64, (k + 1) as f64 / PANELS as f64);
            for (&sx, &sw) in gx.iter().zip(&gw) {
                let s = a + (b - a) * 0.5 * (sx + 1.0);
                let ws = (b - a) * 0.5 * sw;
                let r = rmax * s.powi(GRADING);
                let dr = rmax * GRADING as f64 * s.powi(GRADING - 1);
                radial += ws * r.powf(rho(r)) * r * dr;
            }
        }
        total += wt * radial;
    }
    2.0 * total
}

/// Right-hand side `L(z) = (S(Dv), Dz) + b(v, v, z) - (q, div z)` of the
/// exact pair, for every velocity basis function. The stress uses the
/// continuous exponent.
pub fn consistency_rhs(
    case: &ManufacturedCase,
    law: &StressLaw,
    mesh: &Triangulation,
    spaces: &MixedSpaces,
    convection: bool,
) -> Result<Vec<f64>> {
    assemble_functional(mesh, &spaces.velocity, ERROR_DEGREE, |x| {
        let v = case.velocity(x);
        let grad = case.velocity_gradient(x)?;
        let q = case.pressure(x);
        let s = law.stress_at(x, &grad);
        let mut g1 = s - Tensor2::identity() * q;
        let mut g0 = Vector2::zeros();
        if convection {
            // b(v, v, z) = 1/2 ([grad v] v, z) - 1/2 (v (x) v, grad z)
            g0 = grad * v * 0.5;
            g1 -= v * v.transpose() * 0.5;
        }
        Ok((g0, g1))
    })
}

/// One row of a convergence table.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRecord {
    pub level: usize,
    pub h: f64,
    pub e_v: f64,
    /// `|| q_h - P0 q ||_{p'_h}`.
    pub e_q: f64,
    /// Element-wise sum `sum_T || q_h - P0 q ||_{p'(xi_T), T}`.
    pub e_q_sum: f64,
    pub eoc_v: Option<f64>,
    pub eoc_q: Option<f64>,
    pub theory_v: f64,
    pub theory_q: f64,
    pub newton_iterations: usize,
    /// `||q_h||_{p'_h} + ||Dv_h||_{p_h}`.
    pub stability: f64,
}

#[derive(Debug, Clone)]
pub struct StudyResult {
    pub records: Vec<ErrorRecord>,
    pub reports: Vec<NewtonReport>,
    /// Level whose Newton iteration failed; later levels were not run.
    pub failed_level: Option<usize>,
}

impl StudyResult {
    pub fn complete(&self) -> bool {
        self.failed_level.is_none()
    }
}

#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub pair: MixedPair,
    pub levels: usize,
    pub convection: bool,
    pub newton: NewtonConfig,
}

impl StudyConfig {
    pub fn new(pair: MixedPair, levels: usize) -> Self {
        Self { pair, levels, convection: true, newton: NewtonConfig::default() }
    }
}

/// Solves levels `0..=levels` with continuation and records the errors.
pub fn run_convergence_study(case: &ManufacturedCase, cfg: &StudyConfig) -> Result<StudyResult> {
    if cfg.levels > 9 {
        return Err(Error::Config(format!("at most 9 levels are supported, got {}", cfg.levels)));
    }
    let law = case.law()?;
    let theory_v = case.theory(Quantity::Velocity)?;
    let theory_q = case.theory(Quantity::Pressure)?;
    let mut records: Vec<ErrorRecord> = Vec::new();
    let mut reports = Vec::new();
    let mut mesh = Triangulation::unit_square_initial();
    let mut previous: Option<(Triangulation, MixedSpaces, MixedSolution)> = None;
    for level in 0..=cfg.levels {
        if level > 0 {
            mesh = mesh.refine_red();
        }
        let p_h = freeze(case.exponent(), &mesh);
        let spaces = MixedSpaces::new(&mesh, cfg.pair)?;
        let load = consistency_rhs(case, &law, &mesh, &spaces, cfg.convection)?;
        let problem = DiscreteProblem::new(&mesh, &spaces, &law, &p_h, load, cfg.convection)?;
        let mut u0 = match &previous {
            Some((cm, cs, cu)) => prolong(cu, cm, &mesh, cs, &spaces)?,
            None => MixedSolution::zeros(&spaces),
        };
        set_dirichlet_values(&mut u0, &spaces.velocity, |x| case.velocity(x))?;
        let (u, report) = solve_newton(&problem, u0, &cfg.newton, level)?;
        let converged = report.converged;
        reports.push(report.clone());
        if !converged {
            return Ok(StudyResult { records, reports, failed_level: Some(level) });
        }
        let e_v = norms::error_velocity(
            &mesh,
            &law,
            &p_h,
            &spaces.velocity,
            &u.velocity,
            |x| case.velocity_gradient(x),
            ERROR_DEGREE,
        )?;
        let conj = p_h.conjugate();
        let e_q = norms::error_pressure_projected(
            &mesh,
            &conj,
            &spaces.pressure,
            &u.pressure,
            |x| case.pressure(x),
            ERROR_DEGREE,
        )?;
        let e_q_sum = norms::error_pressure_localized(
            &mesh,
            &conj,
            &spaces.pressure,
            &u.pressure,
            |x| case.pressure(x),
            ERROR_DEGREE,
        )?;
        let stability = norms::stability_proxy(
            &mesh,
            &p_h,
            &spaces.velocity,
            &u.velocity,
            &spaces.pressure,
            &u.pressure,
            ERROR_DEGREE,
        )?;
        let (eoc_v, eoc_q) = match records.last() {
            Some(prev) => {
                let h = [prev.h, mesh.max_h()];
                (
                    norms::eoc(&[prev.e_v, e_v], &h)?[1],
                    norms::eoc(&[prev.e_q, e_q], &h)?[1],
                )
            }
            None => (None, None),
        };
        records.push(ErrorRecord {
            level,
            h: mesh.max_h(),
            e_v,
            e_q,
            e_q_sum,
            eoc_v,
            eoc_q,
            theory_v,
            theory_q,
            newton_iterations: report.iterations,
            stability,
        });
        previous = Some((mesh.clone(), spaces, u));
    }
    Ok(StudyResult { records, reports, failed_level: None })
}

// ---------------------------------------------------------------------------
// electro-rheological scenario

/// Electrode centers sit at `(+-ER_CENTER, 0)`.
pub const ER_CENTER: f64 = 5.0 / 8.0;
pub const ER_RADIUS: f64 = 5.0 / 80.0;
pub const ER_SUSCEPTIBILITY: f64 = 1.0;

/// The shipped two-hole mesh.
pub const ER_MESH: &str = include_str!("../assets/er_mesh.txt");

pub fn er_mesh() -> Result<Triangulation> {
    Triangulation::from_text(ER_MESH)
}

fn outside_electrodes(x: &Point2) -> Result<()> {
    for c in [ER_CENTER, -ER_CENTER] {
        let d = Point2::new(x.x - c, x.y).norm();
        // polygonal hole boundaries lie slightly inside the discs
        if d < ER_RADIUS * (1.0 - 1e-2) {
            return Err(Error::Domain(format!("({}, {}) lies inside an electrode", x.x, x.y)));
        }
    }
    Ok(())
}

/// Dipole field `E(x) = (x - c)/|x - c|^2 - (x + c)/|x + c|^2`, `c = 5/8 e1`.
pub fn er_field(x: &Point2) -> Result<Vector2<f64>> {
    outside_electrodes(x)?;
    let c = Vector2::new(ER_CENTER, 0.0);
    let a = x - c;
    let b = x + c;
    Ok(a / a.norm_squared() - b / b.norm_squared())
}

/// `grad E` with entries `(i, j) = d E_i / d x_j`.
pub fn er_field_gradient(x: &Point2) -> Result<Tensor2> {
    outside_electrodes(x)?;
    let c = Vector2::new(ER_CENTER, 0.0);
    let term = |d: Vector2<f64>| {
        let n2 = d.norm_squared();
        Tensor2::identity() / n2 - d * d.transpose() * (2.0 / (n2 * n2))
    };
    Ok(term(x - c) - term(x + c))
}

/// Material function `p(t) = 2 + 2 / (1 + 10 t)`.
pub fn er_material(t: f64) -> f64 {
    2.0 + 2.0 / (1.0 + 10.0 * t)
}

/// `p(x) = p_hat(|E(x)|)`.
pub fn er_exponent(x: &Point2) -> Result<f64> {
    Ok(er_material(er_field(x)?.norm()))
}

/// Total force `(x2, 0) + chi [grad E] E`.
pub fn er_force(x: &Point2) -> Result<Vector2<f64>> {
    let e = er_field(x)?;
    let g = er_field_gradient(x)?;
    Ok(Vector2::new(x.y, 0.0) + g * e * ER_SUSCEPTIBILITY)
}

#[derive(Debug, Clone)]
pub struct ErRun {
    pub with_field: bool,
    pub converged: bool,
    pub iterations: usize,
    pub final_residual: f64,
    pub max_speed: f64,
    pub pressure_mean: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub solution: MixedSolution,
    pub exponent: DiscreteExponent,
}

#[derive(Debug, Clone)]
pub struct ErOutcome {
    pub field: Option<ErRun>,
    pub no_field: ErRun,
}

#[derive(Debug, Clone)]
pub struct ErConfig {
    pub newton: NewtonConfig,
    /// Number of exponent continuation stages from `p = 2` to the target.
    pub continuation_steps: usize,
    pub delta: f64,
    pub mu0: f64,
}

impl Default for ErConfig {
    fn default() -> Self {
        Self { newton: NewtonConfig::default(), continuation_steps: 4, delta: DEFAULT_DELTA, mu0: DEFAULT_MU0 }
    }
}

/// Solves the flow on `mesh` with homogeneous Dirichlet data using
/// Taylor-Hood elements. The exponent is blended from 2 to its target over
/// `continuation_steps` stages, each warm-started from the last.
pub fn solve_er(mesh: &Triangulation, with_field: bool, cfg: &ErConfig) -> Result<ErRun> {
    let spaces = MixedSpaces::new(mesh, MixedPair::TaylorHood)?;
    let target: Vec<f64> = if with_field {
        (0..mesh.n_triangles())
            .map(|t| er_exponent(&mesh.geometry(t).barycenter))
            .collect::<Result<_>>()?
    } else {
        vec![er_material(0.0); mesh.n_triangles()]
    };
    let target = DiscreteExponent::from_values(target)?;
    let force = |x: &Point2| -> Vector2<f64> {
        if with_field {
            er_force(x).unwrap_or_else(|_| Vector2::new(x.y, 0.0))
        } else {
            Vector2::new(x.y, 0.0)
        }
    };
    let load = load_vector(mesh, &spaces.velocity, ERROR_DEGREE, force)?;
    let law = StressLaw::new(ExponentField::constant(er_material(0.0))?, cfg.delta, cfg.mu0)?;
    let mut u = MixedSolution::zeros(&spaces);
    let steps = cfg.continuation_steps.max(1);
    let mut last = NewtonReport::default();
    for k in 0..=steps {
        let theta = k as f64 / steps as f64;
        let stage = DiscreteExponent::from_values(
            target.values().iter().map(|&p| 2.0 + theta * (p - 2.0)).collect(),
        )?;
        let problem = DiscreteProblem::new(mesh, &spaces, &law, &stage, load.clone(), true)?;
        let (next, report) = solve_newton(&problem, u, &cfg.newton, 0)?;
        u = next;
        last = report;
        if !last.converged && k == steps {
            break;
        }
    }
    let ns = spaces.velocity.n_scalar_dofs();
    let max_speed = (0..ns)
        .map(|i| Vector2::new(u.velocity[i], u.velocity[ns + i]).norm())
        .fold(0.0, f64::max);
    Ok(ErRun {
        with_field,
        converged: last.converged,
        iterations: last.iterations,
        final_residual: last.final_residual(),
        max_speed,
        pressure_mean: pressure_mean(mesh, &spaces.pressure, &u.pressure),
        p_min: target.min(),
        p_max: target.max(),
        solution: u,
        exponent: target,
    })
}

/// Runs the scenario with and (unless `no_field_only`) without the
/// electric field and writes velocity and pressure VTK files to `out`.
pub fn run_er_demo(
    mesh: &Triangulation,
    out: Option<&Path>,
    no_field_only: bool,
    cfg: &ErConfig,
) -> Result<ErOutcome> {
    let spaces = MixedSpaces::new(mesh, MixedPair::TaylorHood)?;
    let field = if no_field_only { None } else { Some(solve_er(mesh, true, cfg)?) };
    let no_field = solve_er(mesh, false, cfg)?;
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        for run in field.iter().chain(std::iter::once(&no_field)) {
            let tag = if run.with_field { "field" } else { "nofield" };
            let (v, q) = vtk::solution_grids(mesh, &spaces, &run.solution, &run.exponent)?;
            v.write_file(dir.join(format!("velocity_{tag}.vtk")))?;
            q.write_file(dir.join(format!("pressure_{tag}.vtk")))?;
        }
    }
    Ok(ErOutcome { field, no_field })
}

/// Checks that `p_conjugate` accepts every exponent a case can produce.
pub fn validate_case_exponents(case: &ManufacturedCase) -> Result<()> {
    p_conjugate(case.p_minus)?;
    p_conjugate(case.p_plus)?;
    Ok(())
}
