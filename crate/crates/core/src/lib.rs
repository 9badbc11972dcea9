//! Adaptive-thickness layers of 3D Gaussians bound to a triangle mesh.
//!
//! The pipeline goes from two Gaussian clouds and a base mesh to a layer of
//! prismatic cells ([`thickness`], [`cells`]), fills it with a fixed budget of
//! Gaussians ([`sampling`], [`frosted`]), renders and refines them
//! ([`render`], [`optim`]) and carries them along when the mesh is edited
//! ([`pipeline::deform_scene`]).

pub mod cells;
pub mod cli;
pub mod depth;
pub mod error;
pub mod frosted;
pub mod io;
pub mod kdtree;
pub mod math;
pub mod optim;
pub mod pipeline;
pub mod render;
pub mod sampling;
pub mod scene;
pub mod thickness;
pub mod toy;

pub use cells::{build_cells, contract_point, ContractionParams, FrostingLayer, PrismaticCell};
pub use depth::{complexity_score, optimal_depth, DepthAdvice};
pub use error::{Error, Result};
pub use frosted::{transfer_deformation, FrostedGaussian};
pub use pipeline::{build_scene, deform_scene, BuildConfig, FrostingScene};
pub use render::{Camera, Image};
pub use scene::{CloudRole, Gaussian3D, GaussianCloud, TriMesh};
