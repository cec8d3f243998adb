use std::path::{Path, PathBuf};

use crate::mesh::TriangleMesh;
use crate::{DataError, Result};

/// Parses `v` and `f` records; polygons are fan-triangulated from their first
/// vertex. Face tokens may carry `/vt/vn` suffixes and negative (relative)
/// indices. Other records are ignored.
pub fn parse_obj(text: &str, origin: &Path) -> Result<TriangleMesh> {
    let err = |line: usize, msg: String| DataError::Obj { path: PathBuf::from(origin), line, msg };
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = raw.split('#').next().unwrap_or("");
        let mut tokens = content.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let mut v = [0.0f64; 3];
                for slot in &mut v {
                    let t = tokens.next().ok_or_else(|| err(line, "vertex needs 3 coordinates".into()))?;
                    *slot = t.parse().map_err(|_| err(line, format!("bad coordinate {t:?}")))?;
                    if !slot.is_finite() {
                        return Err(err(line, format!("non-finite coordinate {t:?}")));
                    }
                }
                vertices.push(v);
            }
            Some("f") => {
                let idx = tokens
                    .map(|t| {
                        let head = t.split('/').next().unwrap_or("");
                        let i: i64 = head.parse().map_err(|_| err(line, format!("bad face index {t:?}")))?;
                        let resolved = match i {
                            0 => return Err(err(line, "face index 0 is invalid".into())),
                            i if i > 0 => i - 1,
                            i => vertices.len() as i64 + i,
                        };
                        if resolved < 0 || resolved as usize >= vertices.len() {
                            return Err(err(line, format!("face index {i} out of range")));
                        }
                        Ok(resolved as usize)
                    })
                    .collect::<Result<Vec<_>>>()?;
                if idx.len() < 3 {
                    return Err(err(line, "face needs at least 3 vertices".into()));
                }
                for w in 1..idx.len() - 1 {
                    faces.push([idx[0], idx[w], idx[w + 1]]);
                }
            }
            _ => {}
        }
    }
    TriangleMesh::new(vertices, faces)
}

pub fn load_obj(path: impl AsRef<Path>) -> Result<TriangleMesh> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_obj(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quad_is_fan_triangulated() {
        let text = "# square\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvn 0 0 1\nf 1/1/1 2/2/1 3/3/1 4/4/1\n";
        let m = parse_obj(text, Path::new("sq.obj")).unwrap();
        assert_eq!(m.faces, vec![[0, 1, 2], [0, 2, 3]]);
        assert!((m.total_area() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn negative_indices_are_relative() {
        let m = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3 -2 -1\n", Path::new("t.obj")).unwrap();
        assert_eq!(m.faces, vec![[0, 1, 2]]);
    }

    #[test]
    fn errors_name_the_line() {
        let e = parse_obj("v 0 0 0\nv 1 x 0\n", Path::new("bad.obj")).unwrap_err();
        assert!(e.to_string().starts_with("bad.obj:2:"), "{e}");
        let e = parse_obj("v 0 0 0\nf 1 2 3\n", Path::new("bad.obj")).unwrap_err();
        assert!(e.to_string().contains(":2:"), "{e}");
    }
}
