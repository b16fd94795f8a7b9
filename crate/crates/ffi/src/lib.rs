//! C ABI over the sketch-to-shape pipeline.
//!
//! Every fallible call returns a [`PsStatus`]; on failure the message is
//! available from [`ps_last_error`] on the same thread. Handles are opaque
//! and owned by the caller until passed to their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use partsketch::editing::{EditConfig, Editor};
use partsketch::metrics::chamfer;
use partsketch::model::{ModelConfig, SketchModel};
use partsketch::render::GrayImage;
use partsketch::shape::{sample_surface, write_mesh, LabeledMesh, Vec3};
use partsketch::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Numeric = 4,
    EmptySketch = 5,
    EmptyShape = 6,
    State = 7,
    Parse = 8,
    Format = 9,
    Io = 10,
    Panic = 11,
}

/// Loaded sketch-to-shape network.
pub struct PsModel {
    editor: Editor,
}

/// Triangle mesh with a part label per face.
pub struct PsMesh {
    mesh: LabeledMesh,
    presence: Vec<f64>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(err: &Error) -> PsStatus {
    match err {
        Error::Argument(_) => PsStatus::InvalidArgument,
        Error::Config(_) => PsStatus::Config,
        Error::Numeric(_) => PsStatus::Numeric,
        Error::EmptySketch => PsStatus::EmptySketch,
        Error::EmptyShape => PsStatus::EmptyShape,
        Error::State(_) => PsStatus::State,
        Error::Parse { .. } => PsStatus::Parse,
        Error::Format(_) | Error::Json(_) => PsStatus::Format,
        Error::Io(_) => PsStatus::Io,
    }
}

struct Fail(PsStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), format!("{}: {e}", e.code()))
    }
}

fn null(what: &str) -> Fail {
    Fail(PsStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> PsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            PsStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            PsStatus::Panic
        }
    }
}

unsafe fn path_arg<'a>(p: *const c_char, what: &str) -> Result<&'a Path, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(PsStatus::InvalidArgument, format!("{what} is not UTF-8")))?;
    Ok(Path::new(s))
}

unsafe fn points_arg<'a>(p: *const f64, n: usize, what: &str) -> Result<&'a [Vec3], Fail> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p.cast::<Vec3>(), n))
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length without the NUL.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn ps_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let bytes = e.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Static, NUL-terminated version string.
#[no_mangle]
pub extern "C" fn ps_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

fn new_model(model: SketchModel, grid_res: usize, out: *mut *mut PsModel) -> Result<(), Fail> {
    let edit = EditConfig {
        grid_res,
        ..EditConfig::default()
    };
    let editor = Editor::new(model, None, edit)?;
    // SAFETY: callers check `out` for null first.
    unsafe { *out = Box::into_raw(Box::new(PsModel { editor })) };
    Ok(())
}

/// Loads a sketch-network checkpoint. Meshes are extracted at `grid_res`
/// (0 selects the default of 48).
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ps_model_load(path: *const c_char, grid_res: usize, out: *mut *mut PsModel) -> PsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let model = SketchModel::load(path_arg(path, "path")?)?;
        new_model(model, grid_res_or_default(grid_res), out)
    })
}

/// Creates an untrained desk-size model from `seed`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ps_model_new_desk(seed: u64, grid_res: usize, out: *mut *mut PsModel) -> PsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let model = SketchModel::new(&ModelConfig::desk(), seed)?;
        new_model(model, grid_res_or_default(grid_res), out)
    })
}

fn grid_res_or_default(grid_res: usize) -> usize {
    if grid_res == 0 {
        EditConfig::default().grid_res
    } else {
        grid_res
    }
}

/// # Safety
/// `model` must be null or a handle from `ps_model_load`/`ps_model_new_desk`
/// not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ps_model_free(model: *mut PsModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of part slots; 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ps_model_slots(model: *const PsModel) -> usize {
    model.as_ref().map_or(0, |m| m.editor.model.cfg.m)
}

/// Generates a mesh from a row-major 8-bit grayscale sketch (255 = paper).
///
/// # Safety
/// `pixels` must be valid for `width * height` bytes; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn ps_generate(
    model: *const PsModel,
    pixels: *const u8,
    width: usize,
    height: usize,
    out: *mut *mut PsMesh,
) -> PsStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        if pixels.is_null() {
            return Err(null("pixels"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let len = width
            .checked_mul(height)
            .ok_or_else(|| Fail(PsStatus::InvalidArgument, "image size overflows".into()))?;
        let img = GrayImage::from_u8(width, height, std::slice::from_raw_parts(pixels, len))?;
        let editor = &model.editor;
        let mut session = editor.new_session("ffi");
        let result = editor.generate(&mut session, &img)?;
        *out = Box::into_raw(Box::new(PsMesh {
            mesh: result.mesh,
            presence: result.presence,
        }));
        Ok(())
    })
}

/// # Safety
/// `mesh` must be null or a live mesh handle.
#[no_mangle]
pub unsafe extern "C" fn ps_mesh_free(mesh: *mut PsMesh) {
    if !mesh.is_null() {
        drop(Box::from_raw(mesh));
    }
}

/// # Safety
/// `mesh` must be null or a live mesh handle.
#[no_mangle]
pub unsafe extern "C" fn ps_mesh_vertex_count(mesh: *const PsMesh) -> usize {
    mesh.as_ref().map_or(0, |m| m.mesh.vertices.len())
}

/// # Safety
/// `mesh` must be null or a live mesh handle.
#[no_mangle]
pub unsafe extern "C" fn ps_mesh_face_count(mesh: *const PsMesh) -> usize {
    mesh.as_ref().map_or(0, |m| m.mesh.faces.len())
}

/// `3 * vertex_count` coordinates, valid until the mesh is freed.
///
/// # Safety
/// `mesh` must be null or a live mesh handle.
#[no_mangle]
pub unsafe extern "C" fn ps_mesh_vertices(mesh: *const PsMesh) -> *const f64 {
    mesh.as_ref()
        .map_or(ptr::null(), |m| m.mesh.vertices.as_ptr().cast())
}

/// `3 * face_count` vertex indices, valid until the mesh is freed.
///
/// # Safety
/// `mesh` must be null or a live mesh handle.
#[no_mangle]
pub unsafe extern "C" fn ps_mesh_faces(mesh: *const PsMesh) -> *const u32 {
    mesh.as_ref().map_or(ptr::null(), |m| m.mesh.faces.as_ptr().cast())
}

/// Part slot of each face, valid until the mesh is freed.
///
/// # Safety
/// `mesh` must be null or a live mesh handle.
#[no_mangle]
pub unsafe extern "C" fn ps_mesh_face_parts(mesh: *const PsMesh) -> *const u32 {
    mesh.as_ref().map_or(ptr::null(), |m| m.mesh.face_part.as_ptr())
}

/// Copies per-slot presence probabilities into `out` (at most `len`).
/// Returns the slot count.
///
/// # Safety
/// `mesh` must be null or a live handle; `out` null or valid for `len`.
#[no_mangle]
pub unsafe extern "C" fn ps_mesh_presence(mesh: *const PsMesh, out: *mut f64, len: usize) -> usize {
    let Some(m) = mesh.as_ref() else { return 0 };
    if !out.is_null() {
        let n = m.presence.len().min(len);
        ptr::copy_nonoverlapping(m.presence.as_ptr(), out, n);
    }
    m.presence.len()
}

/// Writes the mesh as OBJ, or JSON when `path` ends in `.json`.
///
/// # Safety
/// `mesh` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ps_mesh_write(mesh: *const PsMesh, path: *const c_char) -> PsStatus {
    guard(|| {
        let mesh = mesh.as_ref().ok_or_else(|| null("mesh"))?;
        write_mesh(path_arg(path, "path")?, &mesh.mesh)?;
        Ok(())
    })
}

/// Chamfer distance between two point sets given as packed xyz triples.
///
/// # Safety
/// `a` must be valid for `3 * na` doubles and `b` for `3 * nb`.
#[no_mangle]
pub unsafe extern "C" fn ps_chamfer(a: *const f64, na: usize, b: *const f64, nb: usize, out: *mut f64) -> PsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = chamfer(points_arg(a, na, "a")?, points_arg(b, nb, "b")?)?;
        Ok(())
    })
}

/// Chamfer distance between two meshes on `n_points` seeded surface samples
/// each (mesh `a` with `seed`, mesh `b` with `seed + 1`).
///
/// # Safety
/// `a` and `b` must be live mesh handles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ps_mesh_chamfer(
    a: *const PsMesh,
    b: *const PsMesh,
    n_points: usize,
    seed: u64,
    out: *mut f64,
) -> PsStatus {
    guard(|| {
        let a = a.as_ref().ok_or_else(|| null("a"))?;
        let b = b.as_ref().ok_or_else(|| null("b"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let pa = sample_surface(&a.mesh, n_points, seed)?;
        let pb = sample_surface(&b.mesh, n_points, seed.wrapping_add(1))?;
        *out = chamfer(&pa, &pb)?;
        Ok(())
    })
}
