//! Legacy ASCII VTK (version 2.0) unstructured grids: writer and a reader
//! for the subset the writer produces.

use std::fmt::Write as _;
use std::path::Path;

use crate::assembly::MixedSolution;
use crate::error::{Error, Result};
use crate::exponent::DiscreteExponent;
use crate::mesh::Triangulation;
use crate::spaces::{Family, MixedSpaces};

pub const VTK_TRIANGLE: u8 = 5;
pub const VTK_QUADRATIC_TRIANGLE: u8 = 22;

#[derive(Debug, Clone, PartialEq)]
pub enum Attribute {
    Scalars(Vec<f64>),
    Vectors(Vec<[f64; 3]>),
}

impl Attribute {
    fn len(&self) -> usize {
        match self {
            Attribute::Scalars(v) => v.len(),
            Attribute::Vectors(v) => v.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct UnstructuredGrid {
    pub title: String,
    pub points: Vec<[f64; 3]>,
    pub cells: Vec<Vec<usize>>,
    pub cell_types: Vec<u8>,
    pub point_data: Vec<(String, Attribute)>,
    pub cell_data: Vec<(String, Attribute)>,
}

fn num(out: &mut String, v: f64) {
    // shortest round-trip representation
    let _ = write!(out, "{v:?}");
}

impl UnstructuredGrid {
    fn validate(&self) -> Result<()> {
        if self.cells.len() != self.cell_types.len() {
            return Err(Error::Dimension("cell and cell type counts differ".into()));
        }
        if let Some(c) = self.cells.iter().flatten().find(|&&i| i >= self.points.len()) {
            return Err(Error::Dimension(format!("cell references point {c} of {}", self.points.len())));
        }
        for (name, a) in &self.point_data {
            if a.len() != self.points.len() {
                return Err(Error::Dimension(format!("point attribute {name} has {} values", a.len())));
            }
        }
        for (name, a) in &self.cell_data {
            if a.len() != self.cells.len() {
                return Err(Error::Dimension(format!("cell attribute {name} has {} values", a.len())));
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> Result<String> {
        self.validate()?;
        let mut s = String::new();
        s.push_str("# vtk DataFile Version 2.0\n");
        let title = if self.title.is_empty() { "pxflow" } else { self.title.as_str() };
        s.push_str(title.lines().next().unwrap_or("pxflow"));
        s.push_str("\nASCII\nDATASET UNSTRUCTURED_GRID\n");
        let _ = writeln!(s, "POINTS {} double", self.points.len());
        for p in &self.points {
            num(&mut s, p[0]);
            s.push(' ');
            num(&mut s, p[1]);
            s.push(' ');
            num(&mut s, p[2]);
            s.push('\n');
        }
        let size: usize = self.cells.iter().map(|c| c.len() + 1).sum();
        let _ = writeln!(s, "CELLS {} {}", self.cells.len(), size);
        for c in &self.cells {
            let _ = write!(s, "{}", c.len());
            for i in c {
                let _ = write!(s, " {i}");
            }
            s.push('\n');
        }
        let _ = writeln!(s, "CELL_TYPES {}", self.cells.len());
        for t in &self.cell_types {
            let _ = writeln!(s, "{t}");
        }
        write_block(&mut s, "POINT_DATA", self.points.len(), &self.point_data);
        write_block(&mut s, "CELL_DATA", self.cells.len(), &self.cell_data);
        Ok(s)
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text()?)?;
        Ok(())
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        let mut next = |what: &str| -> Result<(usize, &str)> {
            lines
                .by_ref()
                .find(|(_, l)| !l.is_empty())
                .ok_or_else(|| Error::Parse { line: 0, message: format!("unexpected end of file, expected {what}") })
        };
        let (n, header) = next("header")?;
        if !header.starts_with("# vtk DataFile Version") {
            return Err(Error::Parse { line: n, message: "missing VTK header".into() });
        }
        let (_, title) = next("title")?;
        let (n, fmt) = next("ASCII")?;
        if fmt != "ASCII" {
            return Err(Error::Parse { line: n, message: format!("only ASCII files are supported, got {fmt}") });
        }
        let (n, ds) = next("dataset")?;
        if ds != "DATASET UNSTRUCTURED_GRID" {
            return Err(Error::Parse { line: n, message: format!("unsupported dataset {ds}") });
        }
        let mut grid = UnstructuredGrid { title: title.to_string(), ..Default::default() };

        let parse_f = |n: usize, t: &str| -> Result<f64> {
            t.parse().map_err(|_| Error::Parse { line: n, message: format!("bad number {t}") })
        };
        let parse_u = |n: usize, t: &str| -> Result<usize> {
            t.parse().map_err(|_| Error::Parse { line: n, message: format!("bad integer {t}") })
        };

        let (n, pts) = next("POINTS")?;
        let count = keyword_count(n, pts, "POINTS")?;
        for _ in 0..count {
            let (n, l) = next("point")?;
            let v: Vec<f64> = l.split_whitespace().map(|t| parse_f(n, t)).collect::<Result<_>>()?;
            if v.len() != 3 {
                return Err(Error::Parse { line: n, message: "point needs three coordinates".into() });
            }
            grid.points.push([v[0], v[1], v[2]]);
        }
        let (n, cells) = next("CELLS")?;
        let count = keyword_count(n, cells, "CELLS")?;
        for _ in 0..count {
            let (n, l) = next("cell")?;
            let v: Vec<usize> = l.split_whitespace().map(|t| parse_u(n, t)).collect::<Result<_>>()?;
            if v.is_empty() || v[0] + 1 != v.len() {
                return Err(Error::Parse { line: n, message: "cell size does not match its index list".into() });
            }
            grid.cells.push(v[1..].to_vec());
        }
        let (n, types) = next("CELL_TYPES")?;
        let count = keyword_count(n, types, "CELL_TYPES")?;
        for _ in 0..count {
            let (n, l) = next("cell type")?;
            let t = parse_u(n, l)?;
            grid.cell_types.push(u8::try_from(t).map_err(|_| Error::Parse { line: n, message: "bad cell type".into() })?);
        }

        let mut target: Option<(bool, usize)> = None;
        while let Ok((n, l)) = next("data") {
            let mut it = l.split_whitespace();
            match it.next() {
                Some("POINT_DATA") => target = Some((true, keyword_count(n, l, "POINT_DATA")?)),
                Some("CELL_DATA") => target = Some((false, keyword_count(n, l, "CELL_DATA")?)),
                Some(kind @ ("SCALARS" | "VECTORS")) => {
                    let (is_point, count) =
                        target.ok_or_else(|| Error::Parse { line: n, message: "attribute before data block".into() })?;
                    let name = it
                        .next()
                        .ok_or_else(|| Error::Parse { line: n, message: "attribute without name".into() })?
                        .to_string();
                    let attr = if kind == "SCALARS" {
                        let (n2, lut) = next("LOOKUP_TABLE")?;
                        if !lut.starts_with("LOOKUP_TABLE") {
                            return Err(Error::Parse { line: n2, message: "missing LOOKUP_TABLE".into() });
                        }
                        let mut v = Vec::with_capacity(count);
                        for _ in 0..count {
                            let (n, l) = next("scalar")?;
                            v.push(parse_f(n, l)?);
                        }
                        Attribute::Scalars(v)
                    } else {
                        let mut v = Vec::with_capacity(count);
                        for _ in 0..count {
                            let (n, l) = next("vector")?;
                            let c: Vec<f64> = l.split_whitespace().map(|t| parse_f(n, t)).collect::<Result<_>>()?;
                            if c.len() != 3 {
                                return Err(Error::Parse { line: n, message: "vector needs three components".into() });
                            }
                            v.push([c[0], c[1], c[2]]);
                        }
                        Attribute::Vectors(v)
                    };
                    if is_point {
                        grid.point_data.push((name, attr));
                    } else {
                        grid.cell_data.push((name, attr));
                    }
                }
                _ => return Err(Error::Parse { line: n, message: format!("unexpected line {l}") }),
            }
        }
        grid.validate()?;
        Ok(grid)
    }
}

fn keyword_count(line: usize, text: &str, keyword: &str) -> Result<usize> {
    let mut it = text.split_whitespace();
    if it.next() != Some(keyword) {
        return Err(Error::Parse { line, message: format!("expected {keyword}, got {text}") });
    }
    it.next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::Parse { line, message: format!("{keyword} needs a count") })
}

fn write_block(s: &mut String, keyword: &str, count: usize, data: &[(String, Attribute)]) {
    if data.is_empty() {
        return;
    }
    let _ = writeln!(s, "{keyword} {count}");
    for (name, a) in data {
        match a {
            Attribute::Scalars(v) => {
                let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
                for x in v {
                    num(s, *x);
                    s.push('\n');
                }
            }
            Attribute::Vectors(v) => {
                let _ = writeln!(s, "VECTORS {name} double");
                for x in v {
                    num(s, x[0]);
                    s.push(' ');
                    num(s, x[1]);
                    s.push(' ');
                    num(s, x[2]);
                    s.push('\n');
                }
            }
        }
    }
}

/// Velocity and pressure grids of a mixed solution. Quadratic velocities
/// use six-node triangles; otherwise the vertex values are written. The
/// exponent is attached as cell data to both.
pub fn solution_grids(
    mesh: &Triangulation,
    spaces: &MixedSpaces,
    u: &MixedSolution,
    exponent: &DiscreteExponent,
) -> Result<(UnstructuredGrid, UnstructuredGrid)> {
    if u.velocity.len() != spaces.n_velocity() || u.pressure.len() != spaces.n_pressure() {
        return Err(Error::Dimension("solution does not match the spaces".into()));
    }
    if exponent.values().len() != mesh.n_triangles() {
        return Err(Error::Dimension("exponent does not match the mesh".into()));
    }
    let vs = &spaces.velocity;
    let ns = vs.n_scalar_dofs();
    let to3 = |p: &crate::mesh::Point2| [p.x, p.y, 0.0];
    let p_cells = Attribute::Scalars(exponent.values().to_vec());

    let mut velocity = UnstructuredGrid { title: "velocity".into(), ..Default::default() };
    if vs.family() == Family::P2 {
        velocity.points = vs.nodes().iter().map(to3).collect();
        for t in 0..mesh.n_triangles() {
            let d = vs.element_dofs(t);
            // local edge k is opposite vertex k; VTK wants edges 01, 12, 20
            velocity.cells.push(vec![d[0], d[1], d[2], d[5], d[3], d[4]]);
            velocity.cell_types.push(VTK_QUADRATIC_TRIANGLE);
        }
        velocity.point_data.push((
            "velocity".into(),
            Attribute::Vectors((0..ns).map(|i| [u.velocity[i], u.velocity[ns + i], 0.0]).collect()),
        ));
    } else {
        velocity.points = mesh.vertices().iter().map(to3).collect();
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let d = vs.element_dofs(t);
            velocity.cells.push(tri.to_vec());
            velocity.cell_types.push(VTK_TRIANGLE);
            debug_assert!(d[..3] == tri[..]);
        }
        velocity.point_data.push((
            "velocity".into(),
            Attribute::Vectors((0..mesh.n_vertices()).map(|i| [u.velocity[i], u.velocity[ns + i], 0.0]).collect()),
        ));
    }
    velocity.cell_data.push(("exponent".into(), p_cells.clone()));

    let pressure = UnstructuredGrid {
        title: "pressure".into(),
        points: mesh.vertices().iter().map(to3).collect(),
        cells: mesh.triangles().iter().map(|t| t.to_vec()).collect(),
        cell_types: vec![VTK_TRIANGLE; mesh.n_triangles()],
        point_data: vec![("pressure".into(), Attribute::Scalars(u.pressure.clone()))],
        cell_data: vec![("exponent".into(), p_cells)],
    };
    Ok((velocity, pressure))
}
