//! C ABI over the frosting library.
//!
//! Every function returns a [`FrostingStatus`]. On failure a message is kept
//! per thread and can be read with [`frosting_last_error`]. Scenes and clouds
//! are opaque handles released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use frosting::math::{Mat3, Vec3};
use frosting::{io, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrostingStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    Topology = 5,
    Version = 6,
    BufferTooSmall = 7,
    Internal = 8,
    Panic = 9,
}

/// Pinhole camera: world-to-camera rotation (row-major) and translation,
/// +z forward, +y down, pixel units.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct FrostingCamera {
    pub rotation: [f64; 9],
    pub translation: [f64; 3],
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    pub near: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct FrostingDepthAdvice {
    pub cs: f64,
    pub l_box: f64,
    pub depth: i32,
}

/// Opaque scene handle.
pub struct FrostingScene(frosting::FrostingScene);

/// Opaque Gaussian cloud handle.
pub struct FrostingCloud(frosting::GaussianCloud);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> FrostingStatus {
    match e {
        Error::Io { .. } => FrostingStatus::Io,
        Error::Parse { .. }
        | Error::Truncated { .. }
        | Error::BadIndex { .. }
        | Error::MissingProperty(_)
        | Error::UnsupportedFormat(_)
        | Error::BadRestCount(_)
        | Error::SchemaError(_)
        | Error::CorruptPackage(_)
        | Error::Image(_) => FrostingStatus::Parse,
        Error::TopologyMismatch { .. } => FrostingStatus::Topology,
        Error::VersionError { .. } => FrostingStatus::Version,
        e if e.is_internal() => FrostingStatus::Internal,
        _ => FrostingStatus::InvalidArgument,
    }
}

struct Failure(FrostingStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> FrostingStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            FrostingStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("panic inside the frosting library");
            FrostingStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(FrostingStatus::NullPointer, format!("{what} is null"))
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(FrostingStatus::InvalidArgument, format!("{what} is not UTF-8")))?;
    Ok(PathBuf::from(s))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

fn to_camera(c: &FrostingCamera) -> Result<frosting::Camera, Failure> {
    let cam = frosting::Camera {
        rotation: Mat3::from_row_slice(&c.rotation),
        translation: Vec3::from(c.translation),
        fx: c.fx,
        fy: c.fy,
        cx: c.cx,
        cy: c.cy,
        width: c.width,
        height: c.height,
        near: c.near,
    };
    cam.validate()?;
    Ok(cam)
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn frosting_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message of the last failed call on this thread (empty after a success).
/// The pointer stays valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn frosting_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Loads a package directory into a new scene handle.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn frosting_scene_load(path: *const c_char, out: *mut *mut FrostingScene) -> FrostingStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let scene = io::load_package(&path_arg(path, "path")?)?;
        *out = Box::into_raw(Box::new(FrostingScene(scene)));
        Ok(())
    })
}

/// Writes the scene as a package directory.
///
/// # Safety
/// `scene` must come from this library; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn frosting_scene_save(scene: *const FrostingScene, path: *const c_char) -> FrostingStatus {
    guard(|| {
        let scene = scene.as_ref().ok_or_else(|| null("scene"))?;
        io::store_package(&path_arg(path, "path")?, &scene.0)?;
        Ok(())
    })
}

/// # Safety
/// `scene` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn frosting_scene_free(scene: *mut FrostingScene) {
    if !scene.is_null() {
        drop(Box::from_raw(scene));
    }
}

/// # Safety
/// `scene` must come from this library and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn frosting_scene_gaussian_count(scene: *const FrostingScene, out: *mut usize) -> FrostingStatus {
    guard(|| {
        let scene = scene.as_ref().ok_or_else(|| null("scene"))?;
        *out_arg(out, "out")? = scene.0.gaussians.len();
        Ok(())
    })
}

/// Renders into `rgb`, which must hold `3 * width * height` floats (row-major RGB).
///
/// # Safety
/// `rgb` must point to `len` writable floats.
#[no_mangle]
pub unsafe extern "C" fn frosting_scene_render(
    scene: *const FrostingScene,
    camera: *const FrostingCamera,
    rgb: *mut f32,
    len: usize,
) -> FrostingStatus {
    guard(|| {
        let scene = scene.as_ref().ok_or_else(|| null("scene"))?;
        let cam = to_camera(camera.as_ref().ok_or_else(|| null("camera"))?)?;
        let need = 3 * cam.width as usize * cam.height as usize;
        if rgb.is_null() {
            return Err(null("rgb"));
        }
        if len < need {
            return Err(Failure(
                FrostingStatus::BufferTooSmall,
                format!("buffer holds {len} floats, image needs {need}"),
            ));
        }
        let img = scene.0.render(&cam)?;
        let out = std::slice::from_raw_parts_mut(rgb, need);
        for (o, v) in out.iter_mut().zip(&img.data) {
            *o = *v as f32;
        }
        Ok(())
    })
}

/// New scene whose base mesh takes the given vertex positions (xyz triples).
///
/// # Safety
/// `xyz` must point to `3 * vertex_count` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn frosting_scene_deform(
    scene: *const FrostingScene,
    xyz: *const f64,
    vertex_count: usize,
    out: *mut *mut FrostingScene,
) -> FrostingStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let scene = scene.as_ref().ok_or_else(|| null("scene"))?;
        if xyz.is_null() {
            return Err(null("xyz"));
        }
        let expected = scene.0.mesh.vertices.len();
        if vertex_count != expected {
            return Err(Error::TopologyMismatch {
                expected_vertices: expected,
                expected_faces: scene.0.mesh.faces.len(),
                got_vertices: vertex_count,
                got_faces: scene.0.mesh.faces.len(),
            }
            .into());
        }
        let coords = std::slice::from_raw_parts(xyz, 3 * vertex_count);
        let verts = coords.chunks_exact(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect();
        let mesh = scene.0.mesh.with_positions(verts)?;
        let moved = frosting::deform_scene(&scene.0, &mesh)?;
        *out = Box::into_raw(Box::new(FrostingScene(moved)));
        Ok(())
    })
}

/// Like [`frosting_scene_deform`] with positions read from an OBJ file.
///
/// # Safety
/// `path` must be NUL-terminated; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn frosting_scene_deform_obj(
    scene: *const FrostingScene,
    path: *const c_char,
    out: *mut *mut FrostingScene,
) -> FrostingStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let scene = scene.as_ref().ok_or_else(|| null("scene"))?;
        let mesh = io::read_obj(&path_arg(path, "path")?)?;
        let moved = frosting::deform_scene(&scene.0, &mesh)?;
        *out = Box::into_raw(Box::new(FrostingScene(moved)));
        Ok(())
    })
}

/// Reads a 3DGS PLY cloud.
///
/// # Safety
/// `path` must be NUL-terminated; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn frosting_cloud_read_ply(path: *const c_char, out: *mut *mut FrostingCloud) -> FrostingStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let cloud = io::read_gaussian_ply(&path_arg(path, "path")?)?;
        *out = Box::into_raw(Box::new(FrostingCloud(cloud)));
        Ok(())
    })
}

/// # Safety
/// `cloud` must come from this library; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn frosting_cloud_len(cloud: *const FrostingCloud, out: *mut usize) -> FrostingStatus {
    guard(|| {
        let cloud = cloud.as_ref().ok_or_else(|| null("cloud"))?;
        *out_arg(out, "out")? = cloud.0.len();
        Ok(())
    })
}

/// Complexity score and recommended octree depth for the cloud.
///
/// # Safety
/// `cloud` must come from this library; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn frosting_cloud_depth_advice(
    cloud: *const FrostingCloud,
    gamma: f64,
    out: *mut FrostingDepthAdvice,
) -> FrostingStatus {
    guard(|| {
        let cloud = cloud.as_ref().ok_or_else(|| null("cloud"))?;
        let a = frosting::depth::advise(&cloud.0, gamma)?;
        *out_arg(out, "out")? = FrostingDepthAdvice {
            cs: a.cs,
            l_box: a.l_box,
            depth: a.depth,
        };
        Ok(())
    })
}

/// # Safety
/// `cloud` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn frosting_cloud_free(cloud: *mut FrostingCloud) {
    if !cloud.is_null() {
        drop(Box::from_raw(cloud));
    }
}

/// Contraction map about `center` with radius `radius`.
///
/// # Safety
/// `point`, `center` and `out` must each point to 3 doubles.
#[no_mangle]
pub unsafe extern "C" fn frosting_contract_point(
    point: *const f64,
    center: *const f64,
    radius: f64,
    out: *mut f64,
) -> FrostingStatus {
    guard(|| {
        if point.is_null() || center.is_null() || out.is_null() {
            return Err(null("point, center or out"));
        }
        let p = std::slice::from_raw_parts(point, 3);
        let c = std::slice::from_raw_parts(center, 3);
        let params = frosting::ContractionParams::new(Vec3::new(c[0], c[1], c[2]), radius)?;
        let y = frosting::contract_point(&Vec3::new(p[0], p[1], p[2]), &params);
        std::slice::from_raw_parts_mut(out, 3).copy_from_slice(y.as_slice());
        Ok(())
    })
}
