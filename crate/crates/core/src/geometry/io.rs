//! OBJ / PLY mesh readers, point-cloud files and label CSVs.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::mesh::TriangleMesh;
use super::vec3::Vec3;
use super::PointCloud;
use crate::error::{Error, Result};

/// Load an OBJ or PLY mesh (chosen by extension, falling back to sniffing the
/// `ply` magic). Polygons are fan-triangulated.
pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriangleMesh> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (vertices, faces) = if is_ply(path, &bytes) {
        let ply = parse_ply(path, &bytes)?;
        (ply.vertices, ply.faces)
    } else {
        parse_obj(path, &bytes)?
    };
    TriangleMesh::new(vertices, faces)
}

/// Load a point cloud from PLY (vertex element; faces ignored), OBJ (`v`
/// records) or plain text with three numbers per line (comma or whitespace
/// separated, `#` comments and a non-numeric header line allowed).
pub fn load_point_cloud(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let points = if is_ply(path, &bytes) {
        parse_ply(path, &bytes)?.vertices
    } else if has_extension(path, "obj") {
        parse_obj(path, &bytes)?.0
    } else {
        parse_xyz(path, &bytes)?
    };
    Ok(PointCloud::new(points))
}

/// Write a point cloud as ASCII PLY with 64-bit coordinates.
pub fn save_point_cloud(path: impl AsRef<Path>, cloud: &PointCloud) -> Result<()> {
    let mut out = String::with_capacity(cloud.len() * 48 + 128);
    out.push_str("ply\nformat ascii 1.0\n");
    let _ = writeln!(out, "element vertex {}", cloud.len());
    out.push_str("property double x\nproperty double y\nproperty double z\nend_header\n");
    for p in &cloud.points {
        let _ = writeln!(out, "{} {} {}", p.x, p.y, p.z);
    }
    write_file(path.as_ref(), out.as_bytes())
}

/// Write a mesh as OBJ with 1-based indices.
pub fn save_mesh_obj(path: impl AsRef<Path>, mesh: &TriangleMesh) -> Result<()> {
    let mut out = String::with_capacity(mesh.vertices.len() * 48 + mesh.faces.len() * 24);
    for v in &mesh.vertices {
        let _ = writeln!(out, "v {} {} {}", v.x, v.y, v.z);
    }
    for f in &mesh.faces {
        let _ = writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    write_file(path.as_ref(), out.as_bytes())
}

/// Read a label CSV with header `index,label`. Rows may come in any order but
/// must cover `0..n` exactly once.
pub fn load_labels(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == "index,label" => {}
        _ => return Err(Error::parse(path, "line 1", "expected header `index,label`")),
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let loc = format!("line {}", i + 1);
        let (idx, label) = line
            .split_once(',')
            .ok_or_else(|| Error::parse(path, &loc, "expected `index,label`"))?;
        let idx: usize = idx
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, &loc, format!("bad index `{idx}`")))?;
        let label: u8 = match label.trim() {
            "0" => 0,
            "1" => 1,
            other => return Err(Error::parse(path, &loc, format!("label must be 0 or 1, got `{other}`"))),
        };
        rows.push((idx, label));
    }
    let mut labels = vec![u8::MAX; rows.len()];
    for (idx, label) in rows {
        match labels.get_mut(idx) {
            Some(slot) if *slot == u8::MAX => *slot = label,
            _ => {
                return Err(Error::parse(
                    path,
                    format!("index {idx}"),
                    "indices must cover 0..n exactly once",
                ))
            }
        }
    }
    Ok(labels)
}

pub fn save_labels(path: impl AsRef<Path>, labels: &[u8]) -> Result<()> {
    let mut out = String::from("index,label\n");
    for (i, l) in labels.iter().enumerate() {
        let _ = writeln!(out, "{i},{l}");
    }
    write_file(path.as_ref(), out.as_bytes())
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn has_extension(path: &Path, ext: &str) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case(ext))
}

fn is_ply(path: &Path, bytes: &[u8]) -> bool {
    has_extension(path, "ply") || bytes.starts_with(b"ply\n") || bytes.starts_with(b"ply\r\n")
}

fn parse_f64(path: &Path, loc: &str, tok: &str) -> Result<f64> {
    tok.parse::<f64>()
        .map_err(|_| Error::parse(path, loc, format!("bad number `{tok}`")))
}

/// Fan-split a polygon `v0 v1 v2 ... vn` into `(v0, vi, vi+1)` triangles.
fn fan_triangulate(poly: &[u32], out: &mut Vec<[u32; 3]>) {
    for i in 1..poly.len().saturating_sub(1) {
        out.push([poly[0], poly[i], poly[i + 1]]);
    }
}

fn parse_obj(path: &Path, bytes: &[u8]) -> Result<(Vec<Vec3>, Vec<[u32; 3]>)> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| Error::parse(path, format!("byte {}", e.valid_up_to()), "not UTF-8"))?;
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let mut poly = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let loc = format!("line {}", i + 1);
        let mut toks = line.split_whitespace();
        match toks.next() {
            Some("v") => {
                let coords: Vec<&str> = toks.collect();
                if coords.len() < 3 {
                    return Err(Error::parse(path, &loc, "vertex needs 3 coordinates"));
                }
                vertices.push(Vec3::new(
                    parse_f64(path, &loc, coords[0])?,
                    parse_f64(path, &loc, coords[1])?,
                    parse_f64(path, &loc, coords[2])?,
                ));
            }
            Some("f") => {
                poly.clear();
                for tok in toks {
                    let idx_str = tok.split('/').next().unwrap_or("");
                    let idx: i64 = idx_str
                        .parse()
                        .map_err(|_| Error::parse(path, &loc, format!("bad face index `{tok}`")))?;
                    let resolved = match idx {
                        i if i > 0 => i - 1,
                        i if i < 0 => vertices.len() as i64 + i,
                        _ => return Err(Error::parse(path, &loc, "face index 0 is invalid")),
                    };
                    if resolved < 0 || resolved >= vertices.len() as i64 {
                        return Err(Error::parse(
                            path,
                            &loc,
                            format!("face index {idx} out of range ({} vertices so far)", vertices.len()),
                        ));
                    }
                    poly.push(resolved as u32);
                }
                if poly.len() < 3 {
                    return Err(Error::parse(path, &loc, "face needs at least 3 vertices"));
                }
                fan_triangulate(&poly, &mut faces);
            }
            _ => {}
        }
    }
    Ok((vertices, faces))
}

fn parse_xyz(path: &Path, bytes: &[u8]) -> Result<Vec<Vec3>> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| Error::parse(path, format!("byte {}", e.valid_up_to()), "not UTF-8"))?;
    let mut points = Vec::new();
    let mut seen_data = false;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let loc = format!("line {}", i + 1);
        let toks: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .collect();
        let parsed: Option<Vec<f64>> = toks.iter().take(3).map(|t| t.parse().ok()).collect();
        match parsed {
            Some(v) if v.len() == 3 => {
                seen_data = true;
                points.push(Vec3::new(v[0], v[1], v[2]));
            }
            _ if !seen_data && points.is_empty() => {} // header
            _ => return Err(Error::parse(path, &loc, "expected three coordinates")),
        }
    }
    Ok(points)
}

#[derive(Debug, Clone, Copy, PartialEq)]
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

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar { name: String, ty: Scalar },
    List { name: String, count: Scalar, item: Scalar },
}

impl Property {
    fn name(&self) -> &str {
        match self {
            Property::Scalar { name, .. } | Property::List { name, .. } => name,
        }
    }
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum PlyFormat {
    Ascii,
    BinaryLittleEndian,
}

struct PlyData {
    vertices: Vec<Vec3>,
    faces: Vec<[u32; 3]>,
}

fn parse_ply(path: &Path, bytes: &[u8]) -> Result<PlyData> {
    // Header is ASCII, terminated by `end_header` + newline.
    let mut pos = 0;
    let mut line_no = 0;
    let mut next_line = |pos: &mut usize| -> Option<String> {
        if *pos >= bytes.len() {
            return None;
        }
        let end = bytes[*pos..]
            .iter()
            .position(|&b| b == b'\n')
            .map_or(bytes.len(), |i| *pos + i);
        let line = String::from_utf8_lossy(&bytes[*pos..end]).trim_end_matches('\r').to_string();
        *pos = (end + 1).min(bytes.len());
        line_no += 1;
        Some(line)
    };

    if next_line(&mut pos).as_deref() != Some("ply") {
        return Err(Error::parse(path, "line 1", "missing `ply` magic"));
    }
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    let mut header_lines = 1;
    loop {
        let line = next_line(&mut pos)
            .ok_or_else(|| Error::parse(path, "header", "missing `end_header`"))?;
        header_lines += 1;
        let loc = format!("line {header_lines}");
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["end_header"] => break,
            ["format", "ascii", _] => format = Some(PlyFormat::Ascii),
            ["format", "binary_little_endian", _] => format = Some(PlyFormat::BinaryLittleEndian),
            ["format", other, ..] => {
                return Err(Error::parse(path, &loc, format!("unsupported format `{other}`")))
            }
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count
                    .parse()
                    .map_err(|_| Error::parse(path, &loc, format!("bad element count `{count}`")))?,
                properties: Vec::new(),
            }),
            ["property", "list", count, item, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| Error::parse(path, &loc, "property before element"))?;
                let count = Scalar::parse(count)
                    .ok_or_else(|| Error::parse(path, &loc, format!("unknown type `{count}`")))?;
                let item = Scalar::parse(item)
                    .ok_or_else(|| Error::parse(path, &loc, format!("unknown type `{item}`")))?;
                el.properties.push(Property::List {
                    name: name.to_string(),
                    count,
                    item,
                });
            }
            ["property", ty, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| Error::parse(path, &loc, "property before element"))?;
                let ty = Scalar::parse(ty)
                    .ok_or_else(|| Error::parse(path, &loc, format!("unknown type `{ty}`")))?;
                el.properties.push(Property::Scalar {
                    name: name.to_string(),
                    ty,
                });
            }
            _ => return Err(Error::parse(path, &loc, format!("unrecognized header line `{line}`"))),
        }
    }
    let format = format.ok_or_else(|| Error::parse(path, "header", "missing `format` line"))?;

    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let mut reader: Box<dyn RecordReader> = match format {
        PlyFormat::Ascii => Box::new(AsciiReader::new(path, &bytes[pos..], header_lines)),
        PlyFormat::BinaryLittleEndian => Box::new(BinaryReader {
            path,
            bytes,
            pos,
        }),
    };

    let mut poly: Vec<u32> = Vec::new();
    for el in &elements {
        let xyz: Option<[usize; 3]> = (el.name == "vertex")
            .then(|| {
                let find = |n: &str| el.properties.iter().position(|p| p.name() == n);
                Some([find("x")?, find("y")?, find("z")?])
            })
            .flatten();
        if el.name == "vertex" && xyz.is_none() {
            return Err(Error::parse(path, "header", "vertex element lacks x/y/z"));
        }
        let is_face = el.name == "face";
        let mut values = vec![0.0f64; el.properties.len()];
        for _ in 0..el.count {
            reader.begin_record()?;
            for (pi, prop) in el.properties.iter().enumerate() {
                match prop {
                    Property::Scalar { ty, .. } => values[pi] = reader.scalar(*ty)?,
                    Property::List { name, count, item } => {
                        let n = reader.scalar(*count)?;
                        if n < 0.0 || n.fract() != 0.0 {
                            return Err(reader.error(format!("bad list length {n}")));
                        }
                        let wanted = is_face && (name == "vertex_indices" || name == "vertex_index");
                        if wanted {
                            poly.clear();
                        }
                        for _ in 0..n as usize {
                            let v = reader.scalar(*item)?;
                            if wanted {
                                if v < 0.0 || v.fract() != 0.0 || v >= u32::MAX as f64 {
                                    return Err(reader.error(format!("bad vertex index {v}")));
                                }
                                poly.push(v as u32);
                            }
                        }
                        if wanted {
                            if poly.len() < 3 {
                                return Err(reader.error("face needs at least 3 vertices".into()));
                            }
                            fan_triangulate(&poly, &mut faces);
                        }
                    }
                }
            }
            reader.end_record()?;
            if let Some([x, y, z]) = xyz {
                vertices.push(Vec3::new(values[x], values[y], values[z]));
            }
        }
    }
    Ok(PlyData { vertices, faces })
}

trait RecordReader {
    fn begin_record(&mut self) -> Result<()>;
    fn scalar(&mut self, ty: Scalar) -> Result<f64>;
    fn end_record(&mut self) -> Result<()>;
    fn error(&self, message: String) -> Error;
}

struct AsciiReader<'a> {
    path: &'a Path,
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
    line_offset: usize,
    current: Vec<&'a str>,
    cursor: usize,
    line_no: usize,
}

impl<'a> AsciiReader<'a> {
    fn new(path: &'a Path, body: &'a [u8], header_lines: usize) -> Self {
        let text = std::str::from_utf8(body).unwrap_or("");
        Self {
            path,
            lines: text.lines().enumerate(),
            line_offset: header_lines,
            current: Vec::new(),
            cursor: 0,
            line_no: header_lines,
        }
    }
}

impl RecordReader for AsciiReader<'_> {
    fn begin_record(&mut self) -> Result<()> {
        loop {
            let (i, line) = self
                .lines
                .next()
                .ok_or_else(|| Error::parse(self.path, format!("line {}", self.line_no + 1), "unexpected end of data"))?;
            self.line_no = self.line_offset + i + 1;
            let toks: Vec<&str> = line.split_whitespace().collect();
            if !toks.is_empty() {
                self.current = toks;
                self.cursor = 0;
                return Ok(());
            }
        }
    }

    fn scalar(&mut self, _ty: Scalar) -> Result<f64> {
        let tok = *self
            .current
            .get(self.cursor)
            .ok_or_else(|| self.error("record has too few values".into()))?;
        self.cursor += 1;
        tok.parse::<f64>()
            .map_err(|_| self.error(format!("bad number `{tok}`")))
    }

    fn end_record(&mut self) -> Result<()> {
        if self.cursor != self.current.len() {
            return Err(self.error("record has too many values".into()));
        }
        Ok(())
    }

    fn error(&self, message: String) -> Error {
        Error::parse(self.path, format!("line {}", self.line_no), message)
    }
}

struct BinaryReader<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl RecordReader for BinaryReader<'_> {
    fn begin_record(&mut self) -> Result<()> {
        Ok(())
    }

    fn scalar(&mut self, ty: Scalar) -> Result<f64> {
        let end = self.pos + ty.size();
        if end > self.bytes.len() {
            return Err(self.error("unexpected end of binary data".into()));
        }
        let v = ty.read_le(&self.bytes[self.pos..end]);
        self.pos = end;
        Ok(v)
    }

    fn end_record(&mut self) -> Result<()> {
        Ok(())
    }

    fn error(&self, message: String) -> Error {
        Error::parse(self.path, format!("byte offset {}", self.pos), message)
    }
}
