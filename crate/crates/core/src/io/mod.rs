//! Readers and writers for every on-disk format.

pub mod cameras;
pub mod obj;
pub mod optimizer_state;
pub mod package;
pub mod ply;
pub mod png;

pub use cameras::{read_camera_file, read_cameras, write_camera_file, write_cameras, CameraFile, CameraFrame};
pub use obj::{parse_obj, read_obj, write_obj};
pub use optimizer_state::{read_optimizer_state, write_optimizer_state};
pub use package::{load_package, store_package, Manifest, PACKAGE_VERSION};
pub use ply::{parse_gaussian_ply, read_gaussian_ply, write_gaussian_ply};
pub use png::{read_png, write_png};
