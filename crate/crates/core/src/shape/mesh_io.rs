//! Mesh files: Wavefront-style OBJ with one `g part_<i>` group per part, and
//! the JSON form `{"vertices", "faces", "face_part"}`.

use std::fmt::Write as _;
use std::path::Path;

use super::mesh::LabeledMesh;
use crate::error::{Error, Result};

pub fn to_obj(mesh: &LabeledMesh) -> String {
    let mut out = String::new();
    for v in &mesh.vertices {
        let _ = writeln!(out, "v {:?} {:?} {:?}", v[0], v[1], v[2]);
    }
    let mut parts: Vec<u32> = mesh.face_part.clone();
    parts.sort_unstable();
    parts.dedup();
    for part in parts {
        let _ = writeln!(out, "g part_{part}");
        for (f, face) in mesh.faces.iter().enumerate() {
            if mesh.face_part[f] == part {
                let _ = writeln!(out, "f {} {} {}", face[0] + 1, face[1] + 1, face[2] + 1);
            }
        }
    }
    out
}

/// Parses the OBJ subset written by [`to_obj`]. Faces outside any
/// `part_<i>` group get part 0; polygons are fan-triangulated.
pub fn from_obj(text: &str) -> Result<LabeledMesh> {
    let mut mesh = LabeledMesh::default();
    let mut part = 0u32;
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let err = |message: String| Error::Parse {
            line: line_no,
            message,
        };
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("v") => {
                let xyz: Vec<f64> = tok
                    .take(3)
                    .map(|t| t.parse::<f64>().map_err(|e| err(e.to_string())))
                    .collect::<Result<_>>()?;
                if xyz.len() != 3 {
                    return Err(err("vertex needs three coordinates".into()));
                }
                mesh.vertices.push([xyz[0], xyz[1], xyz[2]]);
            }
            Some("g") => {
                part = tok
                    .next()
                    .and_then(|name| name.strip_prefix("part_"))
                    .and_then(|n| n.parse().ok())
                    .unwrap_or(0);
            }
            Some("f") => {
                let idx: Vec<u32> = tok
                    .map(|t| {
                        let first = t.split('/').next().unwrap_or(t);
                        first
                            .parse::<u32>()
                            .ok()
                            .filter(|&v| v >= 1)
                            .map(|v| v - 1)
                            .ok_or_else(|| err(format!("bad face index {t:?}")))
                    })
                    .collect::<Result<_>>()?;
                if idx.len() < 3 {
                    return Err(err("face needs at least three vertices".into()));
                }
                for k in 1..idx.len() - 1 {
                    mesh.faces.push([idx[0], idx[k], idx[k + 1]]);
                    mesh.face_part.push(part);
                }
            }
            _ => {}
        }
    }
    mesh.validate()?;
    Ok(mesh)
}

pub fn to_json(mesh: &LabeledMesh) -> Result<String> {
    Ok(serde_json::to_string(mesh)?)
}

pub fn from_json(text: &str) -> Result<LabeledMesh> {
    let mesh: LabeledMesh = serde_json::from_str(text)?;
    mesh.validate()?;
    Ok(mesh)
}

/// Writes by extension: `.json` gives the JSON form, anything else OBJ.
pub fn write_mesh(path: &Path, mesh: &LabeledMesh) -> Result<()> {
    let text = if is_json(path) {
        to_json(mesh)?
    } else {
        to_obj(mesh)
    };
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_mesh(path: &Path) -> Result<LabeledMesh> {
    let text = std::fs::read_to_string(path)?;
    if is_json(path) {
        from_json(&text)
    } else {
        from_obj(&text)
    }
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shape::{extract_mesh, PartKind, PartPrimitive};

    fn two_part_mesh() -> LabeledMesh {
        let parts = [
            PartPrimitive::new(PartKind::Box, [-0.4, 0.0, 0.0], [0.3, 0.2, 0.2], 0.0),
            PartPrimitive::new(PartKind::Cylinder, [0.4, 0.0, 0.0], [0.2, 0.4, 0.2], 0.0),
        ];
        extract_mesh(&parts, 12).unwrap()
    }

    #[test]
    fn obj_groups_by_part_and_reads_back() {
        let mesh = two_part_mesh();
        let text = to_obj(&mesh);
        assert!(text.contains("g part_0") && text.contains("g part_1"));
        let back = from_obj(&text).unwrap();
        assert_eq!(back.vertices, mesh.vertices);
        // faces are regrouped by part; compare as multisets
        let mut a: Vec<_> = mesh.faces.iter().zip(&mesh.face_part).collect();
        let mut b: Vec<_> = back.faces.iter().zip(&back.face_part).collect();
        a.sort();
        b.sort();
        assert_eq!(a, b);
    }

    #[test]
    fn json_round_trip() {
        let mesh = two_part_mesh();
        assert_eq!(from_json(&to_json(&mesh).unwrap()).unwrap(), mesh);
    }

    #[test]
    fn obj_errors_name_the_line() {
        let err = from_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 x\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 4, .. }));
        assert!(from_obj("v 0 0 0\nf 1 2 3\n").is_err());
    }
}
