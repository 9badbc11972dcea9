//! Frosting package directories: manifest.json, mesh.obj, layer.bin, gaussians.bin.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::obj;
use crate::cells::{ContractionParams, FrostingLayer};
use crate::error::{Error, Result};
use crate::frosted::FrostedGaussian;
use crate::math::{Quat, Vec3};
use crate::pipeline::FrostingScene;
use crate::scene::sh;

pub const PACKAGE_VERSION: &str = "1.0";
pub const MANIFEST: &str = "manifest.json";
pub const MESH: &str = "mesh.obj";
pub const LAYER: &str = "layer.bin";
pub const GAUSSIANS: &str = "gaussians.bin";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub vertex_count: usize,
    pub face_count: usize,
    pub gaussian_count: usize,
    pub sh_degree: usize,
    pub background: [f64; 3],
    pub contraction: ContractionParams,
    pub seed: u64,
}

/// Bytes per Gaussian record for a SH degree.
pub fn record_size(sh_degree: usize) -> usize {
    4 + 4 * (6 + 3 + 4 + 1 + 4 + sh::coeff_count(sh_degree))
}

fn parse_version(v: &str) -> Option<(u32, u32)> {
    let (a, b) = v.split_once('.')?;
    Some((a.parse().ok()?, b.parse().ok()?))
}

fn check_version(v: &str) -> Result<()> {
    let found = parse_version(v).ok_or_else(|| Error::CorruptPackage(format!("unparseable version '{v}'")))?;
    let supported = parse_version(PACKAGE_VERSION).expect("valid constant");
    if found > supported {
        return Err(Error::VersionError {
            found: v.to_string(),
            supported: PACKAGE_VERSION.to_string(),
        });
    }
    Ok(())
}

fn put(buf: &mut Vec<u8>, v: f64) {
    buf.extend_from_slice(&(v as f32).to_le_bytes());
}

pub fn encode_layer(layer: &FrostingLayer) -> Vec<u8> {
    let mut buf = Vec::with_capacity(8 * layer.delta_in.len());
    for (a, b) in layer.delta_in.iter().zip(&layer.delta_out) {
        put(&mut buf, *a);
        put(&mut buf, *b);
    }
    buf
}

pub fn encode_gaussians(gaussians: &[FrostedGaussian]) -> Vec<u8> {
    let mut buf = Vec::new();
    for g in gaussians {
        buf.extend_from_slice(&g.cell.to_le_bytes());
        for v in g.bary_logits {
            put(&mut buf, v);
        }
        for v in g.log_scales.iter() {
            put(&mut buf, *v);
        }
        let (q, r) = (&g.rotation, &g.residual_rotation);
        for v in [q.w, q.i, q.j, q.k, g.opacity_logit, r.w, r.i, r.j, r.k] {
            put(&mut buf, v);
        }
        for v in &g.sh {
            put(&mut buf, *v);
        }
    }
    buf
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn f32(&mut self) -> f64 {
        let v = f32::from_le_bytes(self.bytes[self.pos..self.pos + 4].try_into().unwrap());
        self.pos += 4;
        v as f64
    }

    fn u32(&mut self) -> u32 {
        let v = u32::from_le_bytes(self.bytes[self.pos..self.pos + 4].try_into().unwrap());
        self.pos += 4;
        v
    }

    fn quat(&mut self) -> Quat {
        let (w, x, y, z) = (self.f32(), self.f32(), self.f32(), self.f32());
        Quat::new(w, x, y, z)
    }
}

fn expect_len(name: &str, got: usize, expected: usize, what: &str) -> Result<()> {
    if got != expected {
        let hint = if got < expected { "truncated" } else { "trailing bytes" };
        return Err(Error::CorruptPackage(format!(
            "{name} has {got} bytes, manifest {what} implies {expected} ({hint} at byte offset {})",
            got.min(expected)
        )));
    }
    Ok(())
}

pub fn decode_layer(bytes: &[u8], vertex_count: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    expect_len(LAYER, bytes.len(), 8 * vertex_count, "vertex_count")?;
    let mut r = Reader { bytes, pos: 0 };
    let mut din = Vec::with_capacity(vertex_count);
    let mut dout = Vec::with_capacity(vertex_count);
    for _ in 0..vertex_count {
        din.push(r.f32());
        dout.push(r.f32());
    }
    Ok((din, dout))
}

pub fn decode_gaussians(bytes: &[u8], count: usize, sh_degree: usize, cells: usize) -> Result<Vec<FrostedGaussian>> {
    expect_len(GAUSSIANS, bytes.len(), count * record_size(sh_degree), "gaussian_count")?;
    let mut r = Reader { bytes, pos: 0 };
    let sh_len = sh::coeff_count(sh_degree);
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let cell = r.u32();
        if cell as usize >= cells {
            return Err(Error::CorruptPackage(format!(
                "gaussian {i} references cell {cell} but the mesh has {cells} faces"
            )));
        }
        let bary_logits = std::array::from_fn(|_| r.f32());
        let log_scales = Vec3::new(r.f32(), r.f32(), r.f32());
        let rotation = r.quat();
        let opacity_logit = r.f32();
        let residual_rotation = r.quat();
        let sh = (0..sh_len).map(|_| r.f32()).collect();
        out.push(FrostedGaussian {
            cell,
            bary_logits,
            log_scales,
            rotation,
            opacity_logit,
            sh,
            residual_rotation,
        });
    }
    Ok(out)
}

pub fn manifest_of(scene: &FrostingScene) -> Manifest {
    Manifest {
        version: PACKAGE_VERSION.to_string(),
        vertex_count: scene.mesh.vertices.len(),
        face_count: scene.mesh.faces.len(),
        gaussian_count: scene.gaussians.len(),
        sh_degree: scene.sh_degree,
        background: scene.background,
        contraction: scene.contraction,
        seed: scene.seed,
    }
}

/// Writes the package directory (created if missing). Floats in the binary
/// files are stored as 32-bit values.
pub fn store_package(dir: &Path, scene: &FrostingScene) -> Result<()> {
    scene.validate()?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, bytes: &[u8]| {
        let p = dir.join(name);
        std::fs::write(&p, bytes).map_err(|e| Error::io(p, e))
    };
    let mut manifest = serde_json::to_string_pretty(&manifest_of(scene)).expect("manifest serializes");
    manifest.push('\n');
    write(MANIFEST, manifest.as_bytes())?;
    write(MESH, obj::encode_obj(&scene.mesh).as_bytes())?;
    write(LAYER, &encode_layer(&scene.layer))?;
    write(GAUSSIANS, &encode_gaussians(&scene.gaussians))
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let p = dir.join(MANIFEST);
    let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: p.clone(),
        position: format!("line {} column {}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    let version = value
        .get("version")
        .and_then(|v| v.as_str())
        .ok_or_else(|| Error::CorruptPackage(format!("{}: missing version string", p.display())))?;
    check_version(version)?;
    serde_json::from_value(value).map_err(|e| Error::CorruptPackage(format!("{}: {e}", p.display())))
}

pub fn load_package(dir: &Path) -> Result<FrostingScene> {
    let manifest = read_manifest(dir)?;
    if manifest.sh_degree > sh::MAX_DEGREE {
        return Err(Error::CorruptPackage(format!("sh_degree {} > {}", manifest.sh_degree, sh::MAX_DEGREE)));
    }
    let mesh = obj::read_obj(&dir.join(MESH))?;
    if mesh.vertices.len() != manifest.vertex_count || mesh.faces.len() != manifest.face_count {
        return Err(Error::CorruptPackage(format!(
            "manifest lists {} vertices / {} faces, mesh.obj has {} / {}",
            manifest.vertex_count,
            manifest.face_count,
            mesh.vertices.len(),
            mesh.faces.len()
        )));
    }
    let read = |name: &str| {
        let p = dir.join(name);
        std::fs::read(&p).map_err(|e| Error::io(p, e))
    };
    let (din, dout) = decode_layer(&read(LAYER)?, manifest.vertex_count)?;
    let gaussians = decode_gaussians(&read(GAUSSIANS)?, manifest.gaussian_count, manifest.sh_degree, mesh.faces.len())?;
    let layer = FrostingLayer::from_deltas(&mesh, din, dout)?;
    Ok(FrostingScene {
        mesh,
        layer,
        gaussians,
        sh_degree: manifest.sh_degree,
        background: manifest.background,
        contraction: manifest.contraction,
        seed: manifest.seed,
    })
}
