use nalgebra::Vector2;

use pxflow::assembly::MixedSolution;
use pxflow::exponent::{freeze, ExponentField};
use pxflow::mesh::Triangulation;
use pxflow::spaces::{MixedPair, MixedSpaces};
use pxflow::vtk::{solution_grids, Attribute, UnstructuredGrid};

fn grids(pair: MixedPair) -> (Triangulation, UnstructuredGrid, UnstructuredGrid) {
    let mesh = Triangulation::unit_square(2);
    let spaces = MixedSpaces::new(&mesh, pair).unwrap();
    let mut u = MixedSolution::zeros(&spaces);
    u.velocity = spaces.velocity.interpolate_vector(|x| Vector2::new(x.y, -x.x)).unwrap();
    u.pressure = spaces.pressure.interpolate_scalar(|x| x.x * 0.1 - 1.0 / 3.0).unwrap();
    let p = freeze(&ExponentField::academic(1.0, 2.0, 3.0).unwrap(), &mesh);
    let (v, q) = solution_grids(&mesh, &spaces, &u, &p).unwrap();
    (mesh, v, q)
}

#[test]
fn solution_grids_round_trip_through_text() {
    for pair in [MixedPair::Mini, MixedPair::TaylorHood] {
        let (_, v, q) = grids(pair);
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("v.vtk");
        v.write_file(&file).unwrap();
        assert_eq!(UnstructuredGrid::read_file(&file).unwrap(), v);
        assert_eq!(UnstructuredGrid::parse(&q.to_text().unwrap()).unwrap(), q);
    }
}

#[test]
fn quadratic_cells_list_edge_midpoints_in_vtk_order() {
    let (mesh, v, _) = grids(MixedPair::TaylorHood);
    assert_eq!(v.cells.len(), mesh.n_triangles());
    for (cell, &ty) in v.cells.iter().zip(&v.cell_types) {
        assert_eq!(ty, 22);
        let p = |i: usize| Vector2::new(v.points[cell[i]][0], v.points[cell[i]][1]);
        for (mid, (a, b)) in [(3, (0, 1)), (4, (1, 2)), (5, (2, 0))] {
            assert!((p(mid) - (p(a) + p(b)) * 0.5).norm() < 1e-15);
        }
    }
    // nodal values of a linear field sit at the nodes
    let Attribute::Vectors(vals) = &v.point_data[0].1 else { panic!("velocity must be a vector field") };
    for (x, val) in v.points.iter().zip(vals) {
        assert!((val[0] - x[1]).abs() < 1e-14 && (val[1] + x[0]).abs() < 1e-14);
    }
}

#[test]
fn linear_cells_and_exponent_cell_data() {
    let (mesh, v, q) = grids(MixedPair::Mini);
    assert!(v.cell_types.iter().all(|&t| t == 5));
    assert_eq!(v.points.len(), mesh.n_vertices());
    let Attribute::Scalars(p) = &q.cell_data[0].1 else { panic!("exponent must be scalar") };
    assert_eq!(p.len(), mesh.n_triangles());
    assert!(p.iter().all(|&x| (2.0..=3.0).contains(&x)));
}

#[test]
fn malformed_files_are_rejected() {
    let (_, _, q) = grids(MixedPair::Mini);
    let text = q.to_text().unwrap();
    assert!(UnstructuredGrid::parse("").is_err());
    assert!(UnstructuredGrid::parse(&text.replace("UNSTRUCTURED_GRID", "POLYDATA")).is_err());
    let truncated: String = text.lines().take(20).collect::<Vec<_>>().join("\n");
    assert!(UnstructuredGrid::parse(&truncated).is_err());
}

#[test]
fn mismatched_attribute_lengths_are_rejected() {
    let (_, _, mut q) = grids(MixedPair::Mini);
    q.point_data.push(("short".into(), Attribute::Scalars(vec![1.0])));
    assert!(q.to_text().is_err());
}
