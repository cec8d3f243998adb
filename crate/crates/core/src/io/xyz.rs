use std::fmt::Write;
use std::path::Path;

use ndarray::Array2;

use crate::cloud::PointCloud;
use crate::error::{CoreError, Result};

/// One `x y z` triple per line. Blank lines and `#` comments are skipped;
/// columns past the third are ignored.
pub fn parse_xyz(text: &str, origin: &Path) -> Result<PointCloud> {
    let err = |line: usize, msg: String| CoreError::Parse { path: origin.to_path_buf(), line, msg };
    let mut flat = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut toks = line.split_whitespace();
        for axis in ["x", "y", "z"] {
            let tok = toks.next().ok_or_else(|| err(lineno, format!("missing {axis} coordinate")))?;
            let v: f64 = tok.parse().map_err(|_| err(lineno, format!("non-numeric token {tok:?}")))?;
            if !v.is_finite() {
                return Err(err(lineno, format!("non-finite coordinate {tok:?}")));
            }
            flat.push(v);
        }
    }
    if flat.is_empty() {
        return Err(CoreError::EmptyCloud);
    }
    let n = flat.len() / 3;
    PointCloud::new(Array2::from_shape_vec((n, 3), flat).expect("multiple of 3"))
}

/// Shortest round-trip decimal representation, one point per line.
pub fn write_xyz(cloud: &PointCloud) -> String {
    let mut out = String::with_capacity(cloud.len() * 48);
    for r in cloud.points().outer_iter() {
        let _ = writeln!(out, "{:?} {:?} {:?}", r[0], r[1], r[2]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_names_line() {
        let e = parse_xyz("0 0 0\n1 2 3\n4 five 6\n", Path::new("t.xyz")).unwrap_err();
        match e {
            CoreError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(e_to_string_contains("t.xyz:3"));
        fn e_to_string_contains(s: &str) -> bool {
            parse_xyz("0 0 0\n1 2 3\n4 five 6\n", Path::new("t.xyz")).unwrap_err().to_string().contains(s)
        }
    }

    #[test]
    fn nan_rejected() {
        assert!(parse_xyz("NaN 0 0\n", Path::new("a.xyz")).is_err());
    }

    #[test]
    fn comments_and_extra_columns() {
        let c = parse_xyz("# header\n\n1 2 3 0.5 0.5 0.5\n-1 -2 -3\n", Path::new("a.xyz")).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.point(1).to_vec(), vec![-1.0, -2.0, -3.0]);
    }
}
