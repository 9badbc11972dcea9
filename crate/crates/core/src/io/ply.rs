//! Binary little-endian PLY clouds in the de-facto 3DGS vertex layout.

use std::collections::HashMap;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::math::{Quat, Vec3};
use crate::scene::{sh, CloudRole, Gaussian3D, GaussianCloud};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn read(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

struct Header {
    vertex_count: usize,
    /// (name, type, byte offset within a vertex record)
    props: Vec<(String, Scalar, usize)>,
    stride: usize,
    data_start: usize,
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        position: format!("header line {line}"),
        message: message.into(),
    }
}

fn parse_header(path: &Path, bytes: &[u8]) -> Result<Header> {
    const END: &[u8] = b"end_header\n";
    let end = bytes
        .windows(END.len())
        .position(|w| w == END)
        .ok_or_else(|| Error::Truncated {
            path: path.to_path_buf(),
            offset: bytes.len() as u64,
            message: "no end_header line".into(),
        })?;
    let text = std::str::from_utf8(&bytes[..end]).map_err(|_| parse_error(path, 0, "header is not UTF-8"))?;
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
    match lines.next() {
        Some((_, "ply")) => {}
        _ => return Err(parse_error(path, 1, "missing 'ply' magic")),
    }
    let mut format_seen = false;
    let mut in_vertex = false;
    let mut vertex_seen = false;
    let mut vertex_count = 0;
    let mut props = Vec::new();
    let mut stride = 0;
    for (no, line) in lines {
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok.as_slice() {
            [] => {}
            ["comment", ..] | ["obj_info", ..] => {}
            ["format", fmt, _version] => {
                if *fmt != "binary_little_endian" {
                    return Err(Error::UnsupportedFormat(format!("PLY format '{fmt}' (only binary_little_endian is read)")));
                }
                format_seen = true;
            }
            ["element", name, count] => {
                let count: usize = count.parse().map_err(|_| parse_error(path, no, format!("bad element count '{count}'")))?;
                if *name == "vertex" {
                    if vertex_seen {
                        return Err(parse_error(path, no, "duplicate vertex element"));
                    }
                    vertex_seen = true;
                    vertex_count = count;
                    in_vertex = true;
                } else {
                    if !vertex_seen {
                        return Err(Error::UnsupportedFormat(format!(
                            "element '{name}' precedes the vertex element"
                        )));
                    }
                    in_vertex = false;
                }
            }
            ["property", "list", ..] => {
                if in_vertex {
                    return Err(Error::UnsupportedFormat("list property in vertex element".into()));
                }
            }
            ["property", ty, name] => {
                if in_vertex {
                    let t = Scalar::parse(ty).ok_or_else(|| parse_error(path, no, format!("unknown property type '{ty}'")))?;
                    props.push((name.to_string(), t, stride));
                    stride += t.size();
                }
            }
            _ => return Err(parse_error(path, no, format!("unrecognized header line '{line}'"))),
        }
    }
    if !format_seen {
        return Err(parse_error(path, 2, "missing format line"));
    }
    if !vertex_seen {
        return Err(parse_error(path, 2, "missing vertex element"));
    }
    Ok(Header {
        vertex_count,
        props,
        stride,
        data_start: end + END.len(),
    })
}

fn property_names(degree: usize) -> Vec<String> {
    let rest = sh::coeff_count(degree) - 3;
    let mut names: Vec<String> = ["x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    names.extend((0..rest).map(|i| format!("f_rest_{i}")));
    names.push("opacity".into());
    names.extend((0..3).map(|i| format!("scale_{i}")));
    names.extend((0..4).map(|i| format!("rot_{i}")));
    names
}

pub fn read_gaussian_ply(path: &Path) -> Result<GaussianCloud> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_gaussian_ply(path, &bytes)
}

/// Parses PLY bytes; `path` is only used in error messages.
pub fn parse_gaussian_ply(path: &Path, bytes: &[u8]) -> Result<GaussianCloud> {
    let h = parse_header(path, bytes)?;
    let index: HashMap<&str, (Scalar, usize)> = h.props.iter().map(|(n, t, o)| (n.as_str(), (*t, *o))).collect();
    let rest_count = h.props.iter().filter(|(n, ..)| n.starts_with("f_rest_")).count();
    let degree = match rest_count {
        0 => 0,
        9 => 1,
        24 => 2,
        45 => 3,
        n => return Err(Error::BadRestCount(n)),
    };
    let lookup = |name: &str| index.get(name).copied().ok_or_else(|| Error::MissingProperty(name.to_string()));
    let mut required = vec!["x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2"]
        .into_iter()
        .map(String::from)
        .collect::<Vec<_>>();
    required.extend((0..rest_count).map(|i| format!("f_rest_{i}")));
    required.push("opacity".into());
    required.extend((0..3).map(|i| format!("scale_{i}")));
    required.extend((0..4).map(|i| format!("rot_{i}")));
    let cols: Vec<(Scalar, usize)> = required.iter().map(|n| lookup(n)).collect::<Result<_>>()?;

    let body = &bytes[h.data_start..];
    let need = h.vertex_count.checked_mul(h.stride).ok_or_else(|| Error::Truncated {
        path: path.to_path_buf(),
        offset: h.data_start as u64,
        message: "vertex count overflows".into(),
    })?;
    if body.len() < need {
        let complete = body.len() / h.stride.max(1);
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            offset: (h.data_start + complete * h.stride) as u64,
            message: format!("vertex {complete} of {} is incomplete", h.vertex_count),
        });
    }
    let per_channel = rest_count / 3;
    let mut gaussians = Vec::with_capacity(h.vertex_count);
    let mut vals = vec![0.0; cols.len()];
    for rec in body[..need].chunks_exact(h.stride.max(1)).take(h.vertex_count) {
        for (v, (t, o)) in vals.iter_mut().zip(&cols) {
            *v = t.read(&rec[*o..]);
        }
        let mut coeffs = vec![0.0; sh::coeff_count(degree)];
        coeffs[..3].copy_from_slice(&vals[3..6]);
        for c in 0..3 {
            for k in 0..per_channel {
                coeffs[3 * (k + 1) + c] = vals[6 + c * per_channel + k];
            }
        }
        let o = 6 + rest_count;
        gaussians.push(Gaussian3D {
            mean: Vec3::new(vals[0], vals[1], vals[2]),
            opacity_logit: vals[o],
            log_scales: Vec3::new(vals[o + 1], vals[o + 2], vals[o + 3]),
            rotation: Quat::new(vals[o + 4], vals[o + 5], vals[o + 6], vals[o + 7]),
            sh: coeffs,
        });
    }
    GaussianCloud::new(gaussians, degree, CloudRole::Unconstrained)
}

/// Writes every value as a 32-bit float; normals are written as zeros.
pub fn write_gaussian_ply(path: &Path, cloud: &GaussianCloud) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    encode_gaussian_ply(&mut w, cloud).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn encode_gaussian_ply<W: Write>(w: &mut W, cloud: &GaussianCloud) -> std::io::Result<()> {
    let degree = cloud.sh_degree;
    writeln!(w, "ply")?;
    writeln!(w, "format binary_little_endian 1.0")?;
    writeln!(w, "element vertex {}", cloud.len())?;
    for name in property_names(degree) {
        writeln!(w, "property float {name}")?;
    }
    writeln!(w, "end_header")?;
    let per_channel = sh::basis_count(degree) - 1;
    let mut put = |v: f64| w.write_all(&(v as f32).to_le_bytes());
    for g in &cloud.gaussians {
        for v in [g.mean.x, g.mean.y, g.mean.z, 0.0, 0.0, 0.0] {
            put(v)?;
        }
        for c in 0..3 {
            put(g.sh[c])?;
        }
        for c in 0..3 {
            for k in 0..per_channel {
                put(g.sh[3 * (k + 1) + c])?;
            }
        }
        put(g.opacity_logit)?;
        for v in g.log_scales.iter() {
            put(*v)?;
        }
        for v in [g.rotation.w, g.rotation.i, g.rotation.j, g.rotation.k] {
            put(v)?;
        }
    }
    Ok(())
}
