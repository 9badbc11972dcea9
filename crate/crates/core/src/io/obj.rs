//! Wavefront OBJ meshes (vertex and face records only).

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::math::Vec3;
use crate::scene::TriMesh;

pub fn read_obj(path: &Path) -> Result<TriMesh> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_obj(path, &text)
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        position: format!("line {line}"),
        message: message.into(),
    }
}

/// Parses OBJ text; n-gons are fan-triangulated as (0, i, i + 1).
pub fn parse_obj(path: &Path, text: &str) -> Result<TriMesh> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("v") => {
                let coords: Vec<&str> = tok.collect();
                if coords.len() < 3 {
                    return Err(parse_error(path, line_no, format!("vertex needs 3 coordinates, got {}", coords.len())));
                }
                let mut v = [0.0; 3];
                for (k, c) in coords.iter().take(3).enumerate() {
                    v[k] = c
                        .parse::<f64>()
                        .map_err(|_| parse_error(path, line_no, format!("bad coordinate '{c}'")))?;
                    if !v[k].is_finite() {
                        return Err(parse_error(path, line_no, format!("non-finite coordinate '{c}'")));
                    }
                }
                vertices.push(Vec3::new(v[0], v[1], v[2]));
            }
            Some("f") => {
                let mut idx = Vec::new();
                for t in tok {
                    let first = t.split('/').next().unwrap_or("");
                    let raw: i64 = first
                        .parse()
                        .map_err(|_| parse_error(path, line_no, format!("bad face index '{t}'")))?;
                    let n = vertices.len() as i64;
                    let resolved = if raw > 0 { raw - 1 } else { n + raw };
                    if raw == 0 || resolved < 0 || resolved >= n {
                        return Err(Error::BadIndex {
                            path: path.to_path_buf(),
                            line: line_no,
                            index: raw,
                            count: vertices.len(),
                        });
                    }
                    idx.push(resolved as u32);
                }
                if idx.len() < 3 {
                    return Err(parse_error(path, line_no, format!("face needs at least 3 vertices, got {}", idx.len())));
                }
                for k in 1..idx.len() - 1 {
                    faces.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    TriMesh::new(vertices, faces)
}

/// Coordinates are written in shortest round-trip form.
pub fn encode_obj(mesh: &TriMesh) -> String {
    let mut s = String::new();
    for v in &mesh.vertices {
        let _ = writeln!(s, "v {:?} {:?} {:?}", v.x, v.y, v.z);
    }
    for f in &mesh.faces {
        let _ = writeln!(s, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    s
}

pub fn write_obj(path: &Path, mesh: &TriMesh) -> Result<()> {
    std::fs::write(path, encode_obj(mesh)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangle_and_quad() {
        let m = parse_obj(Path::new("a.obj"), "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n").unwrap();
        assert_eq!((m.vertices.len(), m.faces.len()), (3, 1));
        let m = parse_obj(
            Path::new("a.obj"),
            "mtllib x.mtl\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvn 0 0 1\nusemtl m\nf 1//1 2//1 3//1 4//1\n",
        )
        .unwrap();
        assert_eq!(m.faces, vec![[0, 1, 2], [0, 2, 3]]);
        let m = parse_obj(Path::new("a.obj"), "v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3 -2 -1\n").unwrap();
        assert_eq!(m.faces, vec![[0, 1, 2]]);
    }

    #[test]
    fn bad_index_names_line() {
        let err = parse_obj(Path::new("a.obj"), "v 0 0 0\nv 1 0 0\nv 0 1 0\n# c\nf 1 2 9\n").unwrap_err();
        match err {
            Error::BadIndex { line, index, count, .. } => assert_eq!((line, index, count), (5, 9, 3)),
            e => panic!("{e}"),
        }
        let err = parse_obj(Path::new("a.obj"), "v 0 0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { ref position, .. } if position == "line 1"));
    }

    #[test]
    fn roundtrip_is_exact() {
        let m = TriMesh::new(
            vec![Vec3::new(0.1, 1e-17, -3.3), Vec3::new(1.0 / 3.0, 0.0, 2.0), Vec3::new(0.0, 7.25, 1e300)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let back = parse_obj(Path::new("a.obj"), &encode_obj(&m)).unwrap();
        assert_eq!(back, m);
    }
}
