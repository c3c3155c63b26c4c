//! Binary little-endian PLY I/O for the reference 3DGS vertex layout:
//!
//! ```text
//! x y z nx ny nz f_dc_0..2 f_rest_0..44 opacity scale_0..2 rot_0..3
//! ```
//!
//! All properties are `float`. Normals are read and discarded, and written as
//! zeros. Other scalar property types are accepted on load (converted to
//! `f32`), unknown properties are skipped, and any elements after `vertex`
//! are ignored.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use crate::cloud::GaussianCloud;

/// Bytes per vertex of the reference layout (62 `float` properties).
pub const REFERENCE_STRIDE: usize = 62 * 4;

#[derive(Debug, Error)]
pub enum PlyError {
    #[error("malformed PLY header: {0}")]
    MalformedHeader(String),
    #[error("unsupported PLY encoding: {0}")]
    UnsupportedEncoding(String),
    #[error("PLY body truncated: need {expected} bytes, found {got}")]
    TruncatedBody { expected: usize, got: usize },
    #[error("non-finite value in property '{property}' of vertex {vertex}")]
    NonFiniteValue { vertex: usize, property: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ScalarType {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl ScalarType {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
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

    fn read(self, b: &[u8]) -> f32 {
        match self {
            Self::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]),
            Self::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()) as f32,
            Self::I8 => b[0] as i8 as f32,
            Self::U8 => b[0] as f32,
            Self::I16 => i16::from_le_bytes([b[0], b[1]]) as f32,
            Self::U16 => u16::from_le_bytes([b[0], b[1]]) as f32,
            Self::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f32,
            Self::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f32,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Position(usize),
    Normal,
    Dc(usize),
    Rest(usize),
    Opacity,
    Scale(usize),
    Rotation(usize),
    Ignored,
}

impl Slot {
    fn from_name(name: &str) -> Slot {
        let indexed = |prefix: &str, max: usize| -> Option<usize> {
            name.strip_prefix(prefix)
                .and_then(|s| s.parse::<usize>().ok())
                .filter(|&i| i < max)
        };
        match name {
            "x" => Slot::Position(0),
            "y" => Slot::Position(1),
            "z" => Slot::Position(2),
            "nx" | "ny" | "nz" => Slot::Normal,
            "opacity" => Slot::Opacity,
            _ => {
                if let Some(i) = indexed("f_dc_", 3) {
                    Slot::Dc(i)
                } else if let Some(i) = indexed("f_rest_", usize::MAX) {
                    Slot::Rest(i)
                } else if let Some(i) = indexed("scale_", 3) {
                    Slot::Scale(i)
                } else if let Some(i) = indexed("rot_", 4) {
                    Slot::Rotation(i)
                } else {
                    Slot::Ignored
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
struct Property {
    name: String,
    ty: ScalarType,
    slot: Slot,
    offset: usize,
}

/// Vertex layout as declared by a PLY header.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlyLayout {
    pub vertex_count: usize,
    pub property_count: usize,
    pub stride_bytes: usize,
    pub sh_rest_count: usize,
    pub has_normals: bool,
    pub header_bytes: usize,
}

impl PlyLayout {
    pub fn is_reference(&self) -> bool {
        self.stride_bytes == REFERENCE_STRIDE && self.has_normals && self.sh_rest_count == 45
    }
}

struct Header {
    layout: PlyLayout,
    properties: Vec<Property>,
    comments: Vec<String>,
}

fn malformed(msg: impl Into<String>) -> PlyError {
    PlyError::MalformedHeader(msg.into())
}

fn parse_header(bytes: &[u8]) -> Result<Header, PlyError> {
    const END: &[u8] = b"end_header";
    let end = bytes
        .windows(END.len())
        .position(|w| w == END)
        .ok_or_else(|| malformed("missing end_header"))?;
    let mut body_start = end + END.len();
    if bytes.get(body_start) == Some(&b'\r') {
        body_start += 1;
    }
    if bytes.get(body_start) != Some(&b'\n') {
        return Err(malformed("end_header not followed by newline"));
    }
    body_start += 1;

    let text = std::str::from_utf8(&bytes[..end]).map_err(|_| malformed("header is not UTF-8"))?;
    let mut lines = text.lines().map(str::trim);
    if lines.next() != Some("ply") {
        return Err(malformed("missing 'ply' magic"));
    }

    let mut format_seen = false;
    let mut comments = Vec::new();
    let mut vertex_count = None;
    let mut in_vertex = false;
    let mut elements_seen = 0usize;
    let mut properties: Vec<Property> = Vec::new();
    let mut offset = 0usize;

    for line in lines {
        let mut parts = line.split_whitespace();
        match parts.next() {
            None | Some("obj_info") => {}
            Some("comment") => {
                comments.push(line["comment".len()..].trim().to_string());
            }
            Some("format") => {
                let fmt = parts.next().unwrap_or_default();
                let version = parts.next().unwrap_or_default();
                if fmt != "binary_little_endian" {
                    return Err(PlyError::UnsupportedEncoding(fmt.to_string()));
                }
                if version != "1.0" {
                    return Err(PlyError::UnsupportedEncoding(format!("{fmt} {version}")));
                }
                format_seen = true;
            }
            Some("element") => {
                let name = parts.next().ok_or_else(|| malformed("element without name"))?;
                let count: usize = parts
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| malformed(format!("bad count for element '{name}'")))?;
                if name == "vertex" {
                    if elements_seen > 0 {
                        return Err(malformed("'vertex' must be the first element"));
                    }
                    if vertex_count.is_some() {
                        return Err(malformed("duplicate 'vertex' element"));
                    }
                    vertex_count = Some(count);
                    in_vertex = true;
                } else {
                    in_vertex = false;
                }
                elements_seen += 1;
            }
            Some("property") => {
                if !in_vertex {
                    continue;
                }
                let ty = parts.next().ok_or_else(|| malformed("property without type"))?;
                if ty == "list" {
                    return Err(malformed("list properties are not supported on 'vertex'"));
                }
                let ty = ScalarType::parse(ty)
                    .ok_or_else(|| malformed(format!("unknown property type '{ty}'")))?;
                let name = parts.next().ok_or_else(|| malformed("property without name"))?;
                if properties.iter().any(|p| p.name == name) {
                    return Err(malformed(format!("duplicate property '{name}'")));
                }
                properties.push(Property {
                    name: name.to_string(),
                    ty,
                    slot: Slot::from_name(name),
                    offset,
                });
                offset += ty.size();
            }
            Some(other) => return Err(malformed(format!("unexpected header keyword '{other}'"))),
        }
    }

    if !format_seen {
        return Err(malformed("missing format line"));
    }
    let vertex_count = vertex_count.ok_or_else(|| malformed("missing 'vertex' element"))?;

    let required = [
        ("x", Slot::Position(0)),
        ("y", Slot::Position(1)),
        ("z", Slot::Position(2)),
        ("f_dc_0", Slot::Dc(0)),
        ("f_dc_1", Slot::Dc(1)),
        ("f_dc_2", Slot::Dc(2)),
        ("opacity", Slot::Opacity),
        ("scale_0", Slot::Scale(0)),
        ("scale_1", Slot::Scale(1)),
        ("scale_2", Slot::Scale(2)),
        ("rot_0", Slot::Rotation(0)),
        ("rot_1", Slot::Rotation(1)),
        ("rot_2", Slot::Rotation(2)),
        ("rot_3", Slot::Rotation(3)),
    ];
    for (name, slot) in required {
        if !properties.iter().any(|p| p.slot == slot) {
            return Err(malformed(format!("missing property '{name}'")));
        }
    }

    let sh_rest_count = properties
        .iter()
        .filter(|p| matches!(p.slot, Slot::Rest(_)))
        .count();
    for j in 0..sh_rest_count {
        if !properties.iter().any(|p| p.slot == Slot::Rest(j)) {
            return Err(malformed(format!(
                "f_rest properties are not contiguous: missing f_rest_{j}"
            )));
        }
    }

    Ok(Header {
        layout: PlyLayout {
            vertex_count,
            property_count: properties.len(),
            stride_bytes: offset,
            sh_rest_count,
            has_normals: properties.iter().any(|p| p.slot == Slot::Normal),
            header_bytes: body_start,
        },
        properties,
        comments,
    })
}

/// Parses only the header of a PLY file.
pub fn read_layout(path: impl AsRef<Path>) -> Result<PlyLayout, PlyError> {
    let bytes = fs::read(path)?;
    Ok(parse_header(&bytes)?.layout)
}

/// Loads a Gaussian cloud from a binary little-endian PLY file.
pub fn load_ply(path: impl AsRef<Path>) -> Result<GaussianCloud, PlyError> {
    let bytes = fs::read(path)?;
    Ok(parse_ply(&bytes)?.0)
}

/// Like [`load_ply`], also returning the declared layout.
pub fn load_ply_with_layout(path: impl AsRef<Path>) -> Result<(GaussianCloud, PlyLayout), PlyError> {
    let bytes = fs::read(path)?;
    parse_ply(&bytes)
}

/// Parses an in-memory PLY file.
pub fn parse_ply(bytes: &[u8]) -> Result<(GaussianCloud, PlyLayout), PlyError> {
    let header = parse_header(bytes)?;
    let layout = header.layout.clone();
    let n = layout.vertex_count;
    let body = &bytes[layout.header_bytes..];
    let expected = n
        .checked_mul(layout.stride_bytes)
        .ok_or_else(|| malformed("vertex count overflows"))?;
    if body.len() < expected {
        return Err(PlyError::TruncatedBody {
            expected,
            got: body.len(),
        });
    }

    let rest_n = layout.sh_rest_count;
    let mut cloud = GaussianCloud::with_capacity(n, rest_n);
    cloud.comments = header.comments;
    cloud.positions.resize(n, [0.0; 3]);
    cloud.f_dc.resize(n, [0.0; 3]);
    cloud.f_rest.resize(n * rest_n, 0.0);
    cloud.opacity.resize(n, 0.0);
    cloud.scales.resize(n, [0.0; 3]);
    cloud.rotations.resize(n, [0.0; 4]);

    let used: Vec<&Property> = header
        .properties
        .iter()
        .filter(|p| !matches!(p.slot, Slot::Normal | Slot::Ignored))
        .collect();

    for (i, row) in body[..expected]
        .chunks_exact(layout.stride_bytes.max(1))
        .take(n)
        .enumerate()
    {
        for p in &used {
            let value = p.ty.read(&row[p.offset..]);
            if !value.is_finite() {
                return Err(PlyError::NonFiniteValue {
                    vertex: i,
                    property: p.name.clone(),
                });
            }
            match p.slot {
                Slot::Position(a) => cloud.positions[i][a] = value,
                Slot::Dc(a) => cloud.f_dc[i][a] = value,
                Slot::Rest(j) => cloud.f_rest[i * rest_n + j] = value,
                Slot::Opacity => cloud.opacity[i] = value,
                Slot::Scale(a) => cloud.scales[i][a] = value,
                Slot::Rotation(a) => cloud.rotations[i][a] = value,
                Slot::Normal | Slot::Ignored => unreachable!(),
            }
        }
    }
    Ok((cloud, layout))
}

fn header_text(cloud: &GaussianCloud) -> String {
    let mut h = String::from("ply\nformat binary_little_endian 1.0\n");
    for c in &cloud.comments {
        h.push_str("comment ");
        h.push_str(c);
        h.push('\n');
    }
    h.push_str(&format!("element vertex {}\n", cloud.len()));
    let mut names: Vec<String> = ["x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    names.extend((0..cloud.sh_rest_count).map(|j| format!("f_rest_{j}")));
    names.extend(
        ["opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"]
            .iter()
            .map(|s| s.to_string()),
    );
    for name in names {
        h.push_str("property float ");
        h.push_str(&name);
        h.push('\n');
    }
    h.push_str("end_header\n");
    h
}

/// Writes the cloud as PLY to any writer, returning the byte count.
pub fn write_ply<W: Write>(cloud: &GaussianCloud, mut w: W) -> io::Result<u64> {
    assert!(cloud.columns_consistent(), "cloud columns disagree in length");
    let header = header_text(cloud);
    w.write_all(header.as_bytes())?;

    let stride = (17 + cloud.sh_rest_count) * 4;
    let mut row = Vec::with_capacity(stride);
    for i in 0..cloud.len() {
        row.clear();
        let mut put = |v: f32| row.extend_from_slice(&v.to_le_bytes());
        cloud.positions[i].iter().for_each(|&v| put(v));
        (0..3).for_each(|_| put(0.0));
        cloud.f_dc[i].iter().for_each(|&v| put(v));
        cloud.rest(i).iter().for_each(|&v| put(v));
        put(cloud.opacity[i]);
        cloud.scales[i].iter().for_each(|&v| put(v));
        cloud.rotations[i].iter().for_each(|&v| put(v));
        w.write_all(&row)?;
    }
    w.flush()?;
    Ok((header.len() + cloud.len() * stride) as u64)
}

/// Saves the cloud to `path`, returning the number of bytes written.
pub fn save_ply(cloud: &GaussianCloud, path: impl AsRef<Path>) -> Result<u64, PlyError> {
    let file = fs::File::create(path)?;
    Ok(write_ply(cloud, BufWriter::new(file))?)
}

/// Serialized size without writing anything.
pub fn encoded_size(cloud: &GaussianCloud) -> u64 {
    (header_text(cloud).len() + cloud.len() * (17 + cloud.sh_rest_count) * 4) as u64
}
