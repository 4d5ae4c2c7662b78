//! Discrete solves with known answers.

use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pxflow::assembly::{
    assemble_functional, divergence_defect, pressure_mean, set_dirichlet_values, DiscreteProblem, MixedSolution,
};
use pxflow::exponent::{freeze, ExponentField, StressLaw, Tensor2};
use pxflow::experiments::{consistency_rhs, run_convergence_study, ManufacturedCase, StudyConfig};
use pxflow::mesh::{Point2, Triangulation};
use pxflow::norms::Case;
use pxflow::solver::{prolong, solve_newton, sparse_lu_solve, MixedLinearSolver, NewtonConfig};
use pxflow::spaces::{MixedPair, MixedSpaces};

const MU0: f64 = 0.5;

/// Divergence-free quadratic velocity.
fn v_exact(x: &Point2) -> Vector2<f64> {
    Vector2::new(x.x * x.x + x.y * x.y, -2.0 * x.x * x.y + x.x)
}

fn grad_v_exact(x: &Point2) -> Tensor2 {
    Tensor2::new(2.0 * x.x, 2.0 * x.y, -2.0 * x.y + 1.0, -2.0 * x.x)
}

/// Linear pressure with zero mean on the unit square.
fn q_exact(x: &Point2) -> f64 {
    x.x - 2.0 * x.y + 0.5
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

#[test]
fn taylor_hood_reproduces_quadratic_stokes_solution() {
    let mesh = Triangulation::unit_square(3);
    let spaces = MixedSpaces::new(&mesh, MixedPair::TaylorHood).unwrap();
    let exponent = ExponentField::constant(2.0).unwrap();
    let law = StressLaw::new(exponent.clone(), 1e-5, MU0).unwrap();
    let p_h = freeze(&exponent, &mesh);
    // L(z) = (mu0 Dv, Dz) - (q, div z); S is linear for p = 2
    let load = assemble_functional(&mesh, &spaces.velocity, 4, |x| {
        let g = grad_v_exact(x);
        let d = (g + g.transpose()) * 0.5;
        Ok((Vector2::zeros(), d * MU0 - Tensor2::identity() * q_exact(x)))
    })
    .unwrap();
    let problem = DiscreteProblem::new(&mesh, &spaces, &law, &p_h, load, false).unwrap();
    let mut u0 = MixedSolution::zeros(&spaces);
    set_dirichlet_values(&mut u0, &spaces.velocity, v_exact).unwrap();
    let (u, report) = solve_newton(&problem, u0, &NewtonConfig::default(), 3).unwrap();
    assert!(report.converged);
    assert_eq!(report.iterations, 1);

    let v_i = spaces.velocity.interpolate_vector(v_exact).unwrap();
    let q_i = spaces.pressure.interpolate_scalar(q_exact).unwrap();
    assert!(max_abs_diff(&u.velocity, &v_i) <= 1e-9, "velocity {:e}", max_abs_diff(&u.velocity, &v_i));
    assert!(max_abs_diff(&u.pressure, &q_i) <= 1e-9, "pressure {:e}", max_abs_diff(&u.pressure, &q_i));
    assert!(u.multiplier.abs() <= 1e-9);
}

#[test]
fn mixed_solver_agrees_with_bordered_direct_solve() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mesh = Triangulation::unit_square(3);
    let exponent = ExponentField::academic(1.0, 2.0, 3.0).unwrap();
    let law = StressLaw::new(exponent.clone(), 1e-5, MU0).unwrap();
    let p_h = freeze(&exponent, &mesh);
    for pair in [MixedPair::Mini, MixedPair::TaylorHood] {
        let spaces = MixedSpaces::new(&mesh, pair).unwrap();
        let load = vec![0.0; spaces.n_velocity()];
        let problem = DiscreteProblem::new(&mesh, &spaces, &law, &p_h, load, true).unwrap();
        let mut u = MixedSolution::zeros(&spaces);
        u.velocity = (0..spaces.n_velocity()).map(|_| rng.random_range(-1.0..1.0)).collect();
        for &d in problem.dirichlet_dofs() {
            u.velocity[d] = 0.0;
        }
        let sys = problem.system(&u).unwrap();
        let mut rhs: Vec<f64> = (0..problem.n_unknowns()).map(|_| rng.random_range(-1.0..1.0)).collect();
        for &d in problem.dirichlet_dofs() {
            rhs[d] = 0.0;
        }
        // consistent continuity data: the pressure rows must sum to zero
        let (p0, p1) = (sys.n_velocity, sys.n_velocity + sys.n_pressure);
        let mean = rhs[p0..p1].iter().sum::<f64>() / sys.n_pressure as f64;
        rhs[p0..p1].iter_mut().for_each(|r| *r -= mean);

        let direct = sparse_lu_solve(&sys.matrix, &rhs).unwrap();
        let fast = MixedLinearSolver::new().solve(&sys, &rhs).unwrap();
        let scale = direct.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        assert!(max_abs_diff(&direct, &fast) <= 1e-9 * scale, "{pair:?}: {:e}", max_abs_diff(&direct, &fast));
    }
}

#[test]
fn study_errors_decrease_and_pressure_has_zero_mean() {
    let case = ManufacturedCase::new(1.0, 1.0, 1.0, 2.0, Case::One).unwrap();
    let cfg = StudyConfig::new(MixedPair::Mini, 4);
    let result = run_convergence_study(&case, &cfg).unwrap();
    assert!(result.complete());
    assert_eq!(result.records.len(), 5);
    assert!(result.records[0].eoc_v.is_none());
    for w in result.records.windows(2) {
        assert!(w[1].e_v < w[0].e_v, "level {}: {} !< {}", w[1].level, w[1].e_v, w[0].e_v);
        assert!(w[1].eoc_v.unwrap() > 0.0);
        assert!(w[1].h < w[0].h);
    }
    for r in &result.reports {
        assert!(r.converged && r.iterations <= 50);
    }
}

#[test]
fn discrete_solution_satisfies_constraints() {
    let case = ManufacturedCase::new(1.0, 1.0, 1.0, 2.5, Case::One).unwrap();
    let law = case.law().unwrap();
    for pair in [MixedPair::Mini, MixedPair::TaylorHood] {
        // the exact velocity is nearly rigid, so a cold start on a fine mesh
        // is degenerate for p > 2; continue from coarser levels instead
        let mut mesh = Triangulation::unit_square(0);
        let mut previous: Option<(Triangulation, MixedSpaces, MixedSolution)> = None;
        for level in 0..=3 {
            if level > 0 {
                mesh = mesh.refine_red();
            }
            let p_h = freeze(case.exponent(), &mesh);
            let spaces = MixedSpaces::new(&mesh, pair).unwrap();
            let load = consistency_rhs(&case, &law, &mesh, &spaces, true).unwrap();
            let problem = DiscreteProblem::new(&mesh, &spaces, &law, &p_h, load, true).unwrap();
            let mut u0 = match &previous {
                Some((cm, cs, cu)) => prolong(cu, cm, &mesh, cs, &spaces).unwrap(),
                None => MixedSolution::zeros(&spaces),
            };
            set_dirichlet_values(&mut u0, &spaces.velocity, |x| case.velocity(x)).unwrap();
            let (u, report) = solve_newton(&problem, u0, &NewtonConfig::default(), level).unwrap();
            assert!(report.converged, "{pair:?} level {level}: {:?}", report.residuals);
            assert!(pressure_mean(&mesh, &spaces.pressure, &u.pressure).abs() <= 1e-12);
            assert!(divergence_defect(&mesh, &spaces, &u.velocity).unwrap() <= 1e-9);
            let ns = spaces.velocity.n_scalar_dofs();
            for &i in spaces.velocity.boundary_scalar_dofs() {
                let g = case.velocity(&spaces.velocity.nodes()[i]);
                assert_eq!((u.velocity[i], u.velocity[ns + i]), (g.x, g.y));
            }
            previous = Some((mesh.clone(), spaces, u));
        }
    }
}

#[test]
fn single_level_study_has_no_eoc() {
    let case = ManufacturedCase::new(0.5, 0.5, 0.5, 2.0, Case::Two).unwrap();
    let result = run_convergence_study(&case, &StudyConfig::new(MixedPair::TaylorHood, 0)).unwrap();
    assert_eq!(result.records.len(), 1);
    assert!(result.records[0].eoc_v.is_none() && result.records[0].eoc_q.is_none());
}

#[test]
fn too_many_levels_are_rejected() {
    let case = ManufacturedCase::new(1.0, 1.0, 1.0, 2.0, Case::One).unwrap();
    assert!(run_convergence_study(&case, &StudyConfig::new(MixedPair::Mini, 10)).is_err());
}
