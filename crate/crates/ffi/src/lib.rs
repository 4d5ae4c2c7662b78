//! C interface to the pxflow solver.
//!
//! Every function returns a [`PxStatus`]. Results are written through out
//! pointers. Meshes and study results are opaque handles that the caller
//! releases with the matching `*_free` function. After a failure,
//! [`px_last_error`] copies the message of the most recent error on the
//! calling thread.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use pxflow::experiments::{self, ErConfig, ManufacturedCase, StudyConfig, StudyResult};
use pxflow::mesh::{MeshStats, Triangulation};
use pxflow::norms::{theory_rate, Case, Quantity};
use pxflow::spaces::MixedPair;
use pxflow::Error;

/// Status codes returned by every entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PxStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    InvalidMesh = 4,
    /// Singular system or a Newton iteration that did not converge.
    Numerical = 5,
    Io = 6,
    Panic = 7,
}

/// Parameters of one convergence study.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PxStudyConfig {
    /// 0 for MINI, 1 for Taylor-Hood.
    pub element: u32,
    /// 1 or 2.
    pub regularity_case: u32,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub p_minus: f64,
    /// Finest refinement level, at most 9.
    pub levels: u32,
    /// Nonzero to include the convective term.
    pub convection: u8,
}

/// One level of a study. EOCs are NaN on the coarsest level.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct PxErrorRecord {
    pub level: u32,
    pub h: f64,
    pub e_v: f64,
    pub e_q: f64,
    pub eoc_v: f64,
    pub eoc_q: f64,
    pub theory_v: f64,
    pub theory_q: f64,
    pub newton_iterations: u32,
    pub stability: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct PxMeshInfo {
    pub n_vertices: usize,
    pub n_triangles: usize,
    pub max_h: f64,
    pub min_angle_degrees: f64,
    pub total_area: f64,
    /// 1 when the mesh is conforming.
    pub conforming: u8,
}

/// Outcome of one electro-rheological run.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct PxErRun {
    pub converged: u8,
    pub iterations: u32,
    pub final_residual: f64,
    pub max_speed: f64,
    pub p_min: f64,
    pub p_max: f64,
}

/// Opaque triangulation.
pub struct PxMesh(Triangulation);

/// Opaque convergence study result.
pub struct PxStudy(StudyResult);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(message: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = message);
}

fn status_of(err: &Error) -> PxStatus {
    match err {
        Error::Parse { .. } => PxStatus::Parse,
        Error::InvalidMesh(_) => PxStatus::InvalidMesh,
        Error::Singular { .. } | Error::LinearSolve { .. } => PxStatus::Numerical,
        Error::Io(_) => PxStatus::Io,
        Error::Domain(_) | Error::Unsupported(_) | Error::Config(_) | Error::Dimension(_) => {
            PxStatus::InvalidArgument
        }
    }
}

/// Runs `f`, recording any error or panic for [`px_last_error`].
fn guard(f: impl FnOnce() -> Result<(), (PxStatus, String)>) -> PxStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PxStatus::Ok,
        Ok(Err((status, message))) => {
            set_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(message);
            PxStatus::Panic
        }
    }
}

fn lift(err: Error) -> (PxStatus, String) {
    (status_of(&err), err.to_string())
}

fn null(what: &str) -> (PxStatus, String) {
    (PxStatus::NullPointer, format!("{what} is null"))
}

fn invalid(message: impl Into<String>) -> (PxStatus, String) {
    (PxStatus::InvalidArgument, message.into())
}

unsafe fn path_arg<'a>(path: *const c_char) -> Result<&'a Path, (PxStatus, String)> {
    if path.is_null() {
        return Err(null("path"));
    }
    let s = CStr::from_ptr(path).to_str().map_err(|_| invalid("path is not valid UTF-8"))?;
    Ok(Path::new(s))
}

fn case_of(index: u32) -> Result<Case, (PxStatus, String)> {
    match index {
        1 => Ok(Case::One),
        2 => Ok(Case::Two),
        other => Err(invalid(format!("regularity case must be 1 or 2, got {other}"))),
    }
}

fn pair_of(element: u32) -> Result<MixedPair, (PxStatus, String)> {
    match element {
        0 => Ok(MixedPair::Mini),
        1 => Ok(MixedPair::TaylorHood),
        other => Err(invalid(format!("element must be 0 (MINI) or 1 (Taylor-Hood), got {other}"))),
    }
}

/// NUL-terminated library version.
#[no_mangle]
pub extern "C" fn px_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the last error message of this thread into `buf`, truncated and
/// NUL-terminated. Returns the full message length in bytes, excluding the
/// terminator.
#[no_mangle]
pub unsafe extern "C" fn px_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Uniform red refinement of the four-triangle unit square.
#[no_mangle]
pub unsafe extern "C" fn px_mesh_unit_square(level: u32, out: *mut *mut PxMesh) -> PxStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if level > 9 {
            return Err(invalid(format!("level must be at most 9, got {level}")));
        }
        *out = Box::into_raw(Box::new(PxMesh(Triangulation::unit_square(level as usize))));
        Ok(())
    })
}

/// Reads a mesh in the text format of `pxflow mesh-info`.
#[no_mangle]
pub unsafe extern "C" fn px_mesh_load(path: *const c_char, out: *mut *mut PxMesh) -> PxStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let mesh = Triangulation::import(path_arg(path)?).map_err(lift)?;
        *out = Box::into_raw(Box::new(PxMesh(mesh)));
        Ok(())
    })
}

/// The built-in two-electrode mesh.
#[no_mangle]
pub unsafe extern "C" fn px_mesh_er(out: *mut *mut PxMesh) -> PxStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = Box::into_raw(Box::new(PxMesh(experiments::er_mesh().map_err(lift)?)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn px_mesh_info(mesh: *const PxMesh, out: *mut PxMeshInfo) -> PxStatus {
    guard(|| {
        let mesh = mesh.as_ref().ok_or_else(|| null("mesh"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let s = MeshStats::of(&mesh.0);
        *out = PxMeshInfo {
            n_vertices: s.n_vertices,
            n_triangles: s.n_triangles,
            max_h: s.max_h,
            min_angle_degrees: s.min_angle_degrees,
            total_area: s.total_area,
            conforming: s.violations.is_empty() as u8,
        };
        Ok(())
    })
}

/// Releases a mesh. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn px_mesh_free(mesh: *mut PxMesh) {
    if !mesh.is_null() {
        drop(Box::from_raw(mesh));
    }
}

/// Predicted convergence rate. `quantity` is 0 for velocity, 1 for pressure.
#[no_mangle]
pub unsafe extern "C" fn px_theory_rate(
    regularity_case: u32,
    quantity: u32,
    alpha: f64,
    beta: f64,
    gamma: f64,
    p_minus: f64,
    p_plus: f64,
    out: *mut f64,
) -> PxStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let quantity = match quantity {
            0 => Quantity::Velocity,
            1 => Quantity::Pressure,
            other => return Err(invalid(format!("quantity must be 0 or 1, got {other}"))),
        };
        *out = theory_rate(case_of(regularity_case)?, quantity, alpha, beta, gamma, p_minus, p_plus)
            .map_err(lift)?;
        Ok(())
    })
}

/// Runs a convergence study on levels `0..=levels`. A Newton failure is
/// not an error here: the completed levels are kept and
/// [`px_study_failed_level`] reports where the run stopped.
#[no_mangle]
pub unsafe extern "C" fn px_study_run(config: *const PxStudyConfig, out: *mut *mut PxStudy) -> PxStatus {
    guard(|| {
        let c = config.as_ref().ok_or_else(|| null("config"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let case = ManufacturedCase::new(c.alpha, c.beta, c.gamma, c.p_minus, case_of(c.regularity_case)?)
            .map_err(lift)?;
        let mut cfg = StudyConfig::new(pair_of(c.element)?, c.levels as usize);
        cfg.convection = c.convection != 0;
        let result = experiments::run_convergence_study(&case, &cfg).map_err(lift)?;
        *out = Box::into_raw(Box::new(PxStudy(result)));
        Ok(())
    })
}

/// Number of completed levels.
#[no_mangle]
pub unsafe extern "C" fn px_study_len(study: *const PxStudy, out: *mut usize) -> PxStatus {
    guard(|| {
        let study = study.as_ref().ok_or_else(|| null("study"))?;
        *out.as_mut().ok_or_else(|| null("out"))? = study.0.records.len();
        Ok(())
    })
}

/// Level whose Newton iteration failed, or -1 for a complete study.
#[no_mangle]
pub unsafe extern "C" fn px_study_failed_level(study: *const PxStudy, out: *mut i32) -> PxStatus {
    guard(|| {
        let study = study.as_ref().ok_or_else(|| null("study"))?;
        *out.as_mut().ok_or_else(|| null("out"))? = study.0.failed_level.map_or(-1, |l| l as i32);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn px_study_record(
    study: *const PxStudy,
    index: usize,
    out: *mut PxErrorRecord,
) -> PxStatus {
    guard(|| {
        let study = study.as_ref().ok_or_else(|| null("study"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let r = study.0.records.get(index).ok_or_else(|| {
            invalid(format!("record {index} out of range ({} levels)", study.0.records.len()))
        })?;
        *out = PxErrorRecord {
            level: r.level as u32,
            h: r.h,
            e_v: r.e_v,
            e_q: r.e_q,
            eoc_v: r.eoc_v.unwrap_or(f64::NAN),
            eoc_q: r.eoc_q.unwrap_or(f64::NAN),
            theory_v: r.theory_v,
            theory_q: r.theory_q,
            newton_iterations: r.newton_iterations as u32,
            stability: r.stability,
        };
        Ok(())
    })
}

/// Releases a study. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn px_study_free(study: *mut PxStudy) {
    if !study.is_null() {
        drop(Box::from_raw(study));
    }
}

/// Solves the electro-rheological flow on `mesh` with (`with_field` != 0)
/// or without the electric field.
#[no_mangle]
pub unsafe extern "C" fn px_er_solve(mesh: *const PxMesh, with_field: u8, out: *mut PxErRun) -> PxStatus {
    guard(|| {
        let mesh = mesh.as_ref().ok_or_else(|| null("mesh"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let run = experiments::solve_er(&mesh.0, with_field != 0, &ErConfig::default()).map_err(lift)?;
        *out = PxErRun {
            converged: run.converged as u8,
            iterations: run.iterations as u32,
            final_residual: run.final_residual,
            max_speed: run.max_speed,
            p_min: run.p_min,
            p_max: run.p_max,
        };
        Ok(())
    })
}
