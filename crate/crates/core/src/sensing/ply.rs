//! PLY point clouds: ASCII and binary little-endian.
//!
//! Only the `vertex` element is used (x, y, z and optional nx, ny, nz). Other
//! elements are skipped with a warning. Missing normals are estimated as the
//! unit vector from the vertex centroid to each vertex.

use super::{CloudError, PoiCloud};
use nalgebra::Vector3;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlyError {
    #[error("cannot read {path}: {msg}")]
    Io { path: String, msg: String },
    #[error("header line {line}: {msg}")]
    Header { line: usize, msg: String },
    #[error("line {line}: {msg}")]
    AsciiBody { line: usize, msg: String },
    #[error("byte offset {offset}: {msg}")]
    BinaryBody { offset: usize, msg: String },
    #[error("element `{element}` declares {expected} entries but only {found} are present")]
    Truncated {
        element: String,
        expected: usize,
        found: usize,
    },
    #[error("vertex {index} (at {location}) has a non-finite coordinate")]
    NonFinite { index: usize, location: String },
    #[error("vertex {0} coincides with the centroid; its normal cannot be estimated")]
    NoNormal(usize),
    #[error(transparent)]
    Cloud(#[from] CloudError),
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
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => Self::I8,
            "uchar" | "uint8" => Self::U8,
            "short" | "int16" => Self::I16,
            "ushort" | "uint16" => Self::U16,
            "int" | "int32" => Self::I32,
            "uint" | "uint32" => Self::U32,
            "float" | "float32" => Self::F32,
            "double" | "float64" => Self::F64,
            _ => return None,
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

    /// ASCII values are parsed at the declared precision so both encodings
    /// of a float32 mesh agree bit for bit.
    fn parse_ascii(self, tok: &str) -> Option<f64> {
        match self {
            Self::F32 => tok.parse::<f32>().ok().map(f64::from),
            Self::F64 => tok.parse::<f64>().ok(),
            _ => tok.parse::<i64>().ok().map(|v| v as f64),
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar(Scalar, String),
    List(Scalar, Scalar),
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

struct Header {
    encoding: PlyEncoding,
    elements: Vec<Element>,
    body_start: usize,
    body_line: usize,
}

fn header_err(line: usize, msg: impl Into<String>) -> PlyError {
    PlyError::Header {
        line,
        msg: msg.into(),
    }
}

fn parse_header(bytes: &[u8]) -> Result<Header, PlyError> {
    let mut pos = 0;
    let mut line_no = 0;
    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let Some(len) = bytes[pos..].iter().position(|&b| b == b'\n') else {
            return Err(header_err(line_no + 1, "missing `end_header`"));
        };
        line_no += 1;
        let raw = &bytes[pos..pos + len];
        pos += len + 1;
        let line = std::str::from_utf8(raw)
            .map_err(|_| header_err(line_no, "header is not valid UTF-8"))?
            .trim_end_matches('\r');
        let tok: Vec<&str> = line.split_whitespace().collect();
        if line_no == 1 {
            if line != "ply" {
                return Err(header_err(1, "file does not start with `ply`"));
            }
            continue;
        }
        match tok.first().copied() {
            None | Some("comment") | Some("obj_info") => {}
            Some("format") => {
                encoding = Some(match tok.get(1).copied() {
                    Some("ascii") => PlyEncoding::Ascii,
                    Some("binary_little_endian") => PlyEncoding::BinaryLittleEndian,
                    Some(other) => {
                        return Err(header_err(line_no, format!("unsupported format `{other}`")))
                    }
                    None => return Err(header_err(line_no, "format line without a format")),
                });
            }
            Some("element") => {
                let (Some(name), Some(count)) = (tok.get(1), tok.get(2)) else {
                    return Err(header_err(line_no, "element needs a name and a count"));
                };
                let count = count
                    .parse()
                    .map_err(|_| header_err(line_no, format!("bad element count `{count}`")))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    props: Vec::new(),
                });
            }
            Some("property") => {
                let Some(el) = elements.last_mut() else {
                    return Err(header_err(line_no, "property before any element"));
                };
                let scalar = |s: Option<&&str>| {
                    s.and_then(|s| Scalar::parse(s)).ok_or_else(|| {
                        header_err(line_no, format!("bad property type in `{line}`"))
                    })
                };
                let prop = if tok.get(1) == Some(&"list") {
                    if tok.len() != 5 {
                        return Err(header_err(
                            line_no,
                            "list property needs two types and a name",
                        ));
                    }
                    Property::List(scalar(tok.get(2))?, scalar(tok.get(3))?)
                } else {
                    if tok.len() != 3 {
                        return Err(header_err(line_no, "property needs a type and a name"));
                    }
                    Property::Scalar(scalar(tok.get(1))?, tok[2].to_string())
                };
                el.props.push(prop);
            }
            Some("end_header") => break,
            Some(other) => return Err(header_err(line_no, format!("unknown keyword `{other}`"))),
        }
    }
    let encoding = encoding.ok_or_else(|| header_err(line_no, "no `format` line"))?;
    Ok(Header {
        encoding,
        elements,
        body_start: pos,
        body_line: line_no + 1,
    })
}

/// Column positions of the used vertex properties.
struct VertexLayout {
    xyz: [usize; 3],
    normal: Option<[usize; 3]>,
}

fn vertex_layout(el: &Element, line: usize) -> Result<VertexLayout, PlyError> {
    let find = |name: &str| -> Option<usize> {
        el.props
            .iter()
            .position(|p| matches!(p, Property::Scalar(_, n) if n == name))
    };
    if el.props.iter().any(|p| matches!(p, Property::List(..))) {
        return Err(header_err(
            line,
            "list properties on `vertex` are not supported",
        ));
    }
    let xyz = match (find("x"), find("y"), find("z")) {
        (Some(x), Some(y), Some(z)) => [x, y, z],
        _ => return Err(header_err(line, "`vertex` lacks x, y or z")),
    };
    let normal = match (find("nx"), find("ny"), find("nz")) {
        (Some(x), Some(y), Some(z)) => Some([x, y, z]),
        (None, None, None) => None,
        _ => return Err(header_err(line, "`vertex` has a partial normal")),
    };
    Ok(VertexLayout { xyz, normal })
}

struct RawVertex {
    p: Vector3<f64>,
    n: Option<Vector3<f64>>,
    location: String,
}

fn pick(values: &[f64], cols: [usize; 3]) -> Vector3<f64> {
    Vector3::new(values[cols[0]], values[cols[1]], values[cols[2]])
}

fn read_ascii(bytes: &[u8], header: &Header) -> Result<Vec<RawVertex>, PlyError> {
    let body =
        std::str::from_utf8(&bytes[header.body_start..]).map_err(|e| PlyError::AsciiBody {
            line: header.body_line,
            msg: format!("body is not valid UTF-8: {e}"),
        })?;
    let mut lines = body
        .lines()
        .enumerate()
        .map(|(i, l)| (header.body_line + i, l))
        .filter(|(_, l)| !l.trim().is_empty());
    let mut out = Vec::new();
    for el in &header.elements {
        let layout = if el.name == "vertex" {
            Some(vertex_layout(el, header.body_line - 1)?)
        } else {
            log::warn!("PLY element `{}` ignored", el.name);
            None
        };
        for k in 0..el.count {
            let Some((line, text)) = lines.next() else {
                return Err(PlyError::Truncated {
                    element: el.name.clone(),
                    expected: el.count,
                    found: k,
                });
            };
            let toks: Vec<&str> = text.split_whitespace().collect();
            let bad = |msg: String| PlyError::AsciiBody { line, msg };
            let mut values = Vec::with_capacity(el.props.len());
            let mut t = 0;
            for prop in &el.props {
                match prop {
                    Property::Scalar(ty, name) => {
                        let tok = toks
                            .get(t)
                            .ok_or_else(|| bad(format!("missing `{name}`")))?;
                        let v = ty
                            .parse_ascii(tok)
                            .ok_or_else(|| bad(format!("cannot parse `{tok}` as {ty:?}")))?;
                        values.push(v);
                        t += 1;
                    }
                    Property::List(..) => {
                        let len: usize = toks
                            .get(t)
                            .and_then(|s| s.parse().ok())
                            .ok_or_else(|| bad("bad list length".into()))?;
                        t += 1 + len;
                        if t > toks.len() {
                            return Err(bad("list runs past end of line".into()));
                        }
                        values.push(f64::NAN);
                    }
                }
            }
            if t != toks.len() {
                return Err(bad(format!("expected {t} values, found {}", toks.len())));
            }
            if let Some(l) = &layout {
                out.push(RawVertex {
                    p: pick(&values, l.xyz),
                    n: l.normal.map(|c| pick(&values, c)),
                    location: format!("line {line}"),
                });
            }
        }
    }
    Ok(out)
}

fn read_binary(bytes: &[u8], header: &Header) -> Result<Vec<RawVertex>, PlyError> {
    let mut pos = header.body_start;
    let mut out = Vec::new();
    for el in &header.elements {
        let layout = if el.name == "vertex" {
            Some(vertex_layout(el, header.body_line - 1)?)
        } else {
            log::warn!("PLY element `{}` ignored", el.name);
            None
        };
        let mut values = Vec::with_capacity(el.props.len());
        for k in 0..el.count {
            let start = pos;
            values.clear();
            let truncated = || PlyError::Truncated {
                element: el.name.clone(),
                expected: el.count,
                found: k,
            };
            for prop in &el.props {
                match prop {
                    Property::Scalar(ty, _) => {
                        let end = pos + ty.size();
                        let b = bytes.get(pos..end).ok_or_else(truncated)?;
                        values.push(ty.read_le(b));
                        pos = end;
                    }
                    Property::List(len_ty, item_ty) => {
                        let b = bytes.get(pos..pos + len_ty.size()).ok_or_else(truncated)?;
                        let len = len_ty.read_le(b);
                        if !(len >= 0.0 && len.fract() == 0.0) {
                            return Err(PlyError::BinaryBody {
                                offset: pos,
                                msg: format!("invalid list length {len}"),
                            });
                        }
                        pos += len_ty.size() + len as usize * item_ty.size();
                        if pos > bytes.len() {
                            return Err(truncated());
                        }
                        values.push(f64::NAN);
                    }
                }
            }
            if let Some(l) = &layout {
                out.push(RawVertex {
                    p: pick(&values, l.xyz),
                    n: l.normal.map(|c| pick(&values, c)),
                    location: format!("byte offset {start}"),
                });
            }
        }
    }
    if pos != bytes.len() {
        log::warn!("{} trailing bytes after PLY body", bytes.len() - pos);
    }
    Ok(out)
}

/// Parses an in-memory PLY file.
pub fn parse_ply(bytes: &[u8]) -> Result<PoiCloud, PlyError> {
    let header = parse_header(bytes)?;
    if !header.elements.iter().any(|e| e.name == "vertex") {
        return Err(header_err(header.body_line - 1, "no `vertex` element"));
    }
    let raw = match header.encoding {
        PlyEncoding::Ascii => read_ascii(bytes, &header)?,
        PlyEncoding::BinaryLittleEndian => read_binary(bytes, &header)?,
    };
    for (index, v) in raw.iter().enumerate() {
        let finite =
            v.p.iter()
                .chain(v.n.iter().flat_map(|n| n.iter()))
                .all(|c| c.is_finite());
        if !finite {
            return Err(PlyError::NonFinite {
                index,
                location: v.location.clone(),
            });
        }
    }
    let points: Vec<Vector3<f64>> = raw.iter().map(|v| v.p).collect();
    let normals = if raw.iter().all(|v| v.n.is_some()) {
        raw.iter().map(|v| v.n.unwrap()).collect()
    } else {
        let c = points.iter().sum::<Vector3<f64>>() / points.len().max(1) as f64;
        let mut normals = Vec::with_capacity(points.len());
        for (i, p) in points.iter().enumerate() {
            let d = p - c;
            if d.norm() == 0.0 {
                return Err(PlyError::NoNormal(i));
            }
            normals.push(d);
        }
        normals
    };
    Ok(PoiCloud::new(points, normals)?)
}

pub fn load_ply(path: impl AsRef<Path>) -> Result<PoiCloud, PlyError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| PlyError::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    })?;
    parse_ply(&bytes)
}

/// Serializes a cloud with double-precision positions and normals.
pub fn write_ply(cloud: &PoiCloud, encoding: PlyEncoding) -> Vec<u8> {
    let format = match encoding {
        PlyEncoding::Ascii => "ascii",
        PlyEncoding::BinaryLittleEndian => "binary_little_endian",
    };
    let mut out = format!(
        "ply\nformat {format} 1.0\nelement vertex {}\n\
         property double x\nproperty double y\nproperty double z\n\
         property double nx\nproperty double ny\nproperty double nz\nend_header\n",
        cloud.len()
    )
    .into_bytes();
    for (p, n) in cloud.points().iter().zip(cloud.normals()) {
        let row = [p.x, p.y, p.z, n.x, n.y, n.z];
        match encoding {
            PlyEncoding::Ascii => {
                let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
                out.extend_from_slice(line.join(" ").as_bytes());
                out.push(b'\n');
            }
            PlyEncoding::BinaryLittleEndian => {
                for v in row {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensing::{aura_standin, sphere_cloud};

    const CUBE: &str = "ply
format ascii 1.0
comment unit cube corners
element vertex 8
property float x
property float y
property float z
element face 6
property list uchar int vertex_indices
end_header
0 0 0
1 0 0
1 1 0
0 1 0
0 0 1
1 0 1
1 1 1
0 1 1
4 0 1 2 3
4 4 5 6 7
4 0 1 5 4
4 1 2 6 5
4 2 3 7 6
4 3 0 4 7
";

    #[test]
    fn unit_cube_normals_point_along_diagonals() {
        let c = parse_ply(CUBE.as_bytes()).unwrap();
        assert_eq!(c.len(), 8);
        let k = 1.0 / 3f64.sqrt();
        for (p, n) in c.points().iter().zip(c.normals()) {
            let expect = (p - Vector3::repeat(0.5)).map(|v| v.signum() * k);
            assert!((n - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn truncated_vertex_list() {
        let mut text = String::from(
            "ply\nformat ascii 1.0\nelement vertex 10\nproperty double x\nproperty double y\nproperty double z\nend_header\n",
        );
        for i in 0..9 {
            text.push_str(&format!("{i} 1 2\n"));
        }
        let err = parse_ply(text.as_bytes()).unwrap_err();
        assert_eq!(
            err,
            PlyError::Truncated {
                element: "vertex".into(),
                expected: 10,
                found: 9
            }
        );

        let cloud = sphere_cloud(10, 1.0);
        let bin = write_ply(&cloud, PlyEncoding::BinaryLittleEndian);
        let cut = &bin[..bin.len() - 3];
        assert!(matches!(
            parse_ply(cut),
            Err(PlyError::Truncated { found: 9, .. })
        ));
    }

    #[test]
    fn ascii_and_binary_agree_bit_for_bit() {
        for cloud in [sphere_cloud(137, 3.3), aura_standin()] {
            let a = parse_ply(&write_ply(&cloud, PlyEncoding::Ascii)).unwrap();
            let b = parse_ply(&write_ply(&cloud, PlyEncoding::BinaryLittleEndian)).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.points(), cloud.points());
            for (x, y) in a.normals().iter().zip(cloud.normals()) {
                assert!((x - y).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn float32_ascii_matches_float32_binary() {
        let pts = [
            [0.1f32, -2.7, 3.3],
            [1e-3, 5.5, -0.25],
            [7.0, 0.3, 0.9],
            [-1.0, -1.0, 4.0],
        ];
        let mut ascii = String::from(
            "ply\nformat ascii 1.0\nelement vertex 4\nproperty float x\nproperty float y\nproperty float z\nend_header\n",
        );
        let mut bin = b"ply\nformat binary_little_endian 1.0\nelement vertex 4\nproperty float x\nproperty float y\nproperty float z\nend_header\n".to_vec();
        for p in pts {
            ascii.push_str(&format!("{} {} {}\n", p[0], p[1], p[2]));
            for v in p {
                bin.extend_from_slice(&v.to_le_bytes());
            }
        }
        assert_eq!(
            parse_ply(ascii.as_bytes()).unwrap(),
            parse_ply(&bin).unwrap()
        );
    }

    #[test]
    fn errors_carry_locations() {
        let bad_header = "ply\nformat ascii 1.0\nelement vertex 1\nproperty quad x\nend_header\n";
        assert!(matches!(
            parse_ply(bad_header.as_bytes()),
            Err(PlyError::Header { line: 4, .. })
        ));

        let big_endian = "ply\nformat binary_big_endian 1.0\nend_header\n";
        assert!(matches!(
            parse_ply(big_endian.as_bytes()),
            Err(PlyError::Header { line: 2, .. })
        ));

        let no_z = "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nend_header\n1 2\n";
        assert!(matches!(
            parse_ply(no_z.as_bytes()),
            Err(PlyError::Header { .. })
        ));

        let body = "ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nend_header\n1 2 3\n1 two 3\n";
        assert_eq!(
            parse_ply(body.as_bytes()).unwrap_err(),
            PlyError::AsciiBody {
                line: 9,
                msg: "cannot parse `two` as F32".into()
            }
        );

        let nan = "ply\nformat ascii 1.0\nelement vertex 2\nproperty double x\nproperty double y\nproperty double z\nend_header\n1 2 3\n1 NaN 3\n";
        assert!(matches!(
            parse_ply(nan.as_bytes()),
            Err(PlyError::NonFinite { index: 1, ref location }) if location == "line 9"
        ));

        assert!(matches!(
            parse_ply(b"solid cube\n"),
            Err(PlyError::Header { line: 1, .. })
        ));
    }

    #[test]
    fn skips_elements_before_vertices() {
        let text = "ply\nformat ascii 1.0\nelement meta 2\nproperty list uchar int ids\nproperty float w\nelement vertex 4\nproperty float x\nproperty float y\nproperty float z\nend_header\n3 1 2 3 0.5\n0 9\n1 0 0\n0 1 0\n0 0 1\n-1 -1 -1\n";
        let c = parse_ply(text.as_bytes()).unwrap();
        assert_eq!(c.len(), 4);
        assert_eq!(c.points()[3], Vector3::new(-1.0, -1.0, -1.0));
    }

    #[test]
    fn shipped_standin_asset_matches_generator() {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/assets/aura_standin.ply");
        assert_eq!(load_ply(path).unwrap(), aura_standin());
    }
}
