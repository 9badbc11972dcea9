use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("quaternion norm is zero (|q| <= 1e-12)")]
    ZeroQuaternion,
    #[error("spherical-harmonic length {got} does not match degree {degree} (expected {expected})")]
    DegreeMismatch {
        degree: usize,
        expected: usize,
        got: usize,
    },
    #[error("need at least {needed} gaussians, got {got}")]
    TooFewGaussians { needed: usize, got: usize },
    #[error("bounding box of the gaussian means is degenerate (longest edge {0:e})")]
    DegenerateBoundingBox(f64),
    #[error("non-positive input: {0}")]
    NonPositiveInput(String),
    #[error("shift list has {shifts} entries but the mesh has {vertices} vertices")]
    ShiftLengthMismatch { shifts: usize, vertices: usize },
    #[error("cell {0} has zero volume")]
    DegenerateCell(usize),
    #[error("frosting layer has no cells")]
    EmptyLayer,
    #[error("frosting layer has zero total volume; volume-proportional sampling is impossible")]
    ZeroVolumeLayer,
    #[error("cell index {index} out of range ({count} cells)")]
    BadCellIndex { index: usize, count: usize },
    #[error("cell center coincides with corner {0}")]
    DegenerateCellCenter(usize),
    #[error("transformed gaussian axes are rank-deficient")]
    DegenerateAxes,
    #[error("loss became non-finite; offending parameter group: {group}")]
    NonFiniteLoss { group: String },
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("mesh topology mismatch: package mesh has {expected_vertices} vertices / {expected_faces} faces, deformed mesh has {got_vertices} vertices / {got_faces} faces")]
    TopologyMismatch {
        expected_vertices: usize,
        expected_faces: usize,
        got_vertices: usize,
        got_faces: usize,
    },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("missing PLY property '{0}'")]
    MissingProperty(String),
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("f_rest property count {0} is not one of 0, 9, 24, 45")]
    BadRestCount(usize),
    #[error("{path}: line {line}: face index {index} out of range ({count} vertices)")]
    BadIndex {
        path: PathBuf,
        line: usize,
        index: i64,
        count: usize,
    },
    #[error("{path}: parse error at {position}: {message}")]
    Parse {
        path: PathBuf,
        position: String,
        message: String,
    },
    #[error("{path}: truncated at byte offset {offset}: {message}")]
    Truncated {
        path: PathBuf,
        offset: u64,
        message: String,
    },
    #[error("schema error: {0}")]
    SchemaError(String),
    #[error("corrupt package: {0}")]
    CorruptPackage(String),
    #[error("package version {found} is newer than the supported version {supported}; upgrade frosting to read it")]
    VersionError { found: String, supported: String },
    #[error("image error: {0}")]
    Image(String),
    #[error("internal invariant violated: {0}")]
    Internal(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True when the error reflects a broken internal invariant rather than bad input.
    pub fn is_internal(&self) -> bool {
        matches!(
            self,
            Error::Internal(_) | Error::NonFiniteLoss { .. } | Error::DegenerateAxes
        )
    }
}
