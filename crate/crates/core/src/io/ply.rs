use std::fmt::Write as _;

use ndarray::Array2;

use crate::cloud::PointCloud;
use crate::error::{CoreError, Result};

fn malformed(msg: impl Into<String>) -> CoreError {
    CoreError::Format { format: "ply", msg: msg.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyEncoding {
    Ascii,
    BinaryLittleEndian,
}

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
    fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "char" | "int8" => Self::I8,
            "uchar" | "uint8" => Self::U8,
            "short" | "int16" => Self::I16,
            "ushort" | "uint16" => Self::U16,
            "int" | "int32" => Self::I32,
            "uint" | "uint32" => Self::U32,
            "float" | "float32" => Self::F32,
            "double" | "float64" => Self::F64,
            other => return Err(malformed(format!("unknown scalar type {other:?}"))),
        })
    }

    fn size(self) -> usize {
        match self {
            Self::I8 | Self::U8 => 1,
            Self::I16 | Self::U16 => 2,
            Self::I32 | Self::U32 | Self::F32 => 4,
            Self::F64 => 8,
        }
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Self::I8 => b[0] as i8 as f64,
            Self::U8 => b[0] as f64,
            Self::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Self::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Self::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Self::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Self::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Self::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug)]
enum Property {
    Scalar(String, Scalar),
    List,
}

#[derive(Debug)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

/// Reads vertex positions; any other vertex property (colors, normals) is ignored.
/// Returns the cloud and per-vertex RGB colors in `[0, 1]` when present.
pub fn parse_ply(bytes: &[u8]) -> Result<(PointCloud, Option<Array2<f64>>)> {
    let header_end = bytes
        .windows(11)
        .position(|w| w == b"end_header\n" || w == b"end_header\r")
        .ok_or_else(|| malformed("missing end_header"))?;
    let header = std::str::from_utf8(&bytes[..header_end]).map_err(|_| malformed("header is not UTF-8"))?;
    let mut body_start = header_end + "end_header".len();
    if bytes.get(body_start) == Some(&b'\r') {
        body_start += 1;
    }
    if bytes.get(body_start) == Some(&b'\n') {
        body_start += 1;
    }

    let mut lines = header.lines();
    if lines.next().map(str::trim) != Some("ply") {
        return Err(malformed("missing ply magic"));
    }
    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();
    for line in lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            [] => {}
            ["comment", ..] | ["obj_info", ..] => {}
            ["format", fmt, _] => {
                encoding = Some(match *fmt {
                    "ascii" => PlyEncoding::Ascii,
                    "binary_little_endian" => PlyEncoding::BinaryLittleEndian,
                    other => return Err(malformed(format!("unsupported format {other}"))),
                })
            }
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count.parse().map_err(|_| malformed("bad element count"))?,
                props: Vec::new(),
            }),
            ["property", "list", count, item, _name] => {
                elements.last_mut().ok_or_else(|| malformed("property before element"))?.props.push({
                    Scalar::parse(count)?;
                    Scalar::parse(item)?;
                    Property::List
                })
            }
            ["property", ty, name] => elements
                .last_mut()
                .ok_or_else(|| malformed("property before element"))?
                .props
                .push(Property::Scalar(name.to_string(), Scalar::parse(ty)?)),
            _ => return Err(malformed(format!("unrecognized header line {line:?}"))),
        }
    }
    let encoding = encoding.ok_or_else(|| malformed("missing format line"))?;
    let vi = elements.iter().position(|e| e.name == "vertex").ok_or_else(|| malformed("no vertex element"))?;
    let vertex = &elements[vi];
    let find = |n: &str| vertex.props.iter().position(|p| matches!(p, Property::Scalar(name, _) if name == n));
    let (ix, iy, iz) = match (find("x"), find("y"), find("z")) {
        (Some(x), Some(y), Some(z)) => (x, y, z),
        _ => return Err(malformed("vertex element lacks x/y/z")),
    };
    let color_idx = match (find("red"), find("green"), find("blue")) {
        (Some(r), Some(g), Some(b)) => Some([r, g, b]),
        _ => None,
    };
    let n = vertex.count;
    let nprops = vertex.props.len();
    let mut rows: Vec<f64> = Vec::with_capacity(n * nprops);

    match encoding {
        PlyEncoding::Ascii => {
            let body = std::str::from_utf8(&bytes[body_start..]).map_err(|_| malformed("body is not UTF-8"))?;
            let mut body_lines = body.lines().filter(|l| !l.trim().is_empty());
            for e in &elements[..vi] {
                for _ in 0..e.count {
                    body_lines.next().ok_or_else(|| malformed("truncated body"))?;
                }
            }
            for i in 0..n {
                let line = body_lines.next().ok_or_else(|| malformed(format!("missing vertex {i}")))?;
                let vals: Vec<f64> = line
                    .split_whitespace()
                    .map(|t| t.parse::<f64>().map_err(|_| malformed(format!("vertex {i}: bad token {t:?}"))))
                    .collect::<Result<_>>()?;
                if vals.len() < nprops {
                    return Err(malformed(format!("vertex {i}: expected {nprops} values")));
                }
                rows.extend_from_slice(&vals[..nprops]);
            }
        }
        PlyEncoding::BinaryLittleEndian => {
            let mut pos = body_start;
            for e in &elements[..vi] {
                let mut stride = 0;
                for p in &e.props {
                    match p {
                        Property::Scalar(_, s) => stride += s.size(),
                        Property::List => return Err(malformed("list-valued element precedes vertices")),
                    }
                }
                pos += stride * e.count;
            }
            for i in 0..n {
                for p in &vertex.props {
                    match p {
                        Property::Scalar(_, s) => {
                            let b = bytes
                                .get(pos..pos + s.size())
                                .ok_or_else(|| malformed(format!("truncated at vertex {i}")))?;
                            rows.push(s.read_le(b));
                            pos += s.size();
                        }
                        Property::List => return Err(malformed("list-valued vertex property")),
                    }
                }
            }
        }
    }

    let table = Array2::from_shape_vec((n, nprops), rows).map_err(|e| malformed(e.to_string()))?;
    let points = Array2::from_shape_fn((n, 3), |(i, k)| table[[i, [ix, iy, iz][k]]]);
    let cloud = PointCloud::new(points)?;
    let colors = color_idx.map(|idx| {
        let integer = matches!(&vertex.props[idx[0]], Property::Scalar(_, Scalar::U8));
        Array2::from_shape_fn((n, 3), |(i, k)| {
            let v = table[[i, idx[k]]];
            if integer {
                v / 255.0
            } else {
                v
            }
        })
    });
    Ok((cloud, colors))
}

/// Writes positions as `double` and optional colors (in `[0, 1]`) as `uchar`.
pub fn write_ply(cloud: &PointCloud, colors: Option<&Array2<f64>>, encoding: PlyEncoding) -> Vec<u8> {
    let n = cloud.len();
    let mut header = String::new();
    header.push_str("ply\n");
    header.push_str(match encoding {
        PlyEncoding::Ascii => "format ascii 1.0\n",
        PlyEncoding::BinaryLittleEndian => "format binary_little_endian 1.0\n",
    });
    let _ = writeln!(header, "element vertex {n}");
    header.push_str("property double x\nproperty double y\nproperty double z\n");
    if colors.is_some() {
        header.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\n");
    }
    header.push_str("end_header\n");
    let to_u8 = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    let mut out = header.into_bytes();
    match encoding {
        PlyEncoding::Ascii => {
            let mut body = String::with_capacity(n * 64);
            for (i, r) in cloud.points().outer_iter().enumerate() {
                let _ = write!(body, "{:?} {:?} {:?}", r[0], r[1], r[2]);
                if let Some(c) = colors {
                    let _ = write!(body, " {} {} {}", to_u8(c[[i, 0]]), to_u8(c[[i, 1]]), to_u8(c[[i, 2]]));
                }
                body.push('\n');
            }
            out.extend_from_slice(body.as_bytes());
        }
        PlyEncoding::BinaryLittleEndian => {
            for (i, r) in cloud.points().outer_iter().enumerate() {
                for k in 0..3 {
                    out.extend_from_slice(&r[k].to_le_bytes());
                }
                if let Some(c) = colors {
                    out.extend((0..3).map(|k| to_u8(c[[i, k]])));
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn colors_ignored_for_positions() {
        let text = "ply\nformat ascii 1.0\ncomment made by hand\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nproperty uchar red\nproperty uchar green\nproperty uchar blue\nelement face 0\nproperty list uchar int vertex_indices\nend_header\n1 2 3 255 0 0\n4 5 6 0 255 0\n";
        let (cloud, colors) = parse_ply(text.as_bytes()).unwrap();
        assert_eq!(cloud.point(1).to_vec(), vec![4.0, 5.0, 6.0]);
        assert_eq!(colors.unwrap()[[0, 0]], 1.0);
    }

    #[test]
    fn binary_with_leading_element_and_extra_props() {
        let mut bytes = b"ply\nformat binary_little_endian 1.0\nelement camera 1\nproperty float fov\nelement vertex 2\nproperty float nx\nproperty double x\nproperty double y\nproperty double z\nend_header\n".to_vec();
        bytes.extend_from_slice(&1.5f32.to_le_bytes());
        for (nx, p) in [(0.0f32, [1.0, 2.0, 3.0]), (1.0, [-1.0, -2.0, -3.5])] {
            bytes.extend_from_slice(&nx.to_le_bytes());
            for v in p {
                bytes.extend_from_slice(&f64::to_le_bytes(v));
            }
        }
        let (cloud, colors) = parse_ply(&bytes).unwrap();
        assert!(colors.is_none());
        assert_eq!(cloud.point(1).to_vec(), vec![-1.0, -2.0, -3.5]);
    }

    #[test]
    fn missing_coordinates() {
        let text = "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nend_header\n1 2\n";
        assert!(parse_ply(text.as_bytes()).is_err());
    }

    #[test]
    fn big_endian_unsupported() {
        let text = "ply\nformat binary_big_endian 1.0\nelement vertex 0\nend_header\n";
        assert!(parse_ply(text.as_bytes()).is_err());
    }
}
