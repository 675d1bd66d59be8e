//! Triangle meshes and ASCII OBJ / PLY reading and writing.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::Vec3;
use crate::scene::{Aabb, TransformTRS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeshFormat {
    Obj,
    Ply,
}

impl MeshFormat {
    pub fn extension(self) -> &'static str {
        match self {
            MeshFormat::Obj => "obj",
            MeshFormat::Ply => "ply",
        }
    }

    pub fn from_extension(ext: &str) -> Option<Self> {
        match ext.to_ascii_lowercase().as_str() {
            "obj" => Some(MeshFormat::Obj),
            "ply" => Some(MeshFormat::Ply),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeshError {
    #[error("line {line}: {message}")]
    ParseError { line: usize, message: String },
    #[error("line {line}: vertex index {index} out of range for {vertex_count} vertices")]
    IndexOutOfRange { line: usize, index: i64, vertex_count: usize },
    #[error("mesh has no triangles")]
    EmptyMesh,
}

fn parse_err(line: usize, message: impl Into<String>) -> MeshError {
    MeshError::ParseError {
        line,
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    vertices: Vec<Vec3>,
    triangles: Vec<[u32; 3]>,
    bounds: Aabb,
}

impl Mesh {
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>) -> Result<Self, MeshError> {
        if triangles.is_empty() {
            return Err(MeshError::EmptyMesh);
        }
        if let Some(&bad) = triangles.iter().flatten().find(|&&i| i as usize >= vertices.len()) {
            return Err(MeshError::IndexOutOfRange {
                line: 0,
                index: bad as i64,
                vertex_count: vertices.len(),
            });
        }
        if let Some(v) = vertices.iter().find(|v| !v.is_finite()) {
            return Err(parse_err(0, format!("non-finite vertex {v:?}")));
        }
        let bounds = Aabb::from_points(vertices.iter().copied()).expect("triangles imply vertices");
        Ok(Self { vertices, triangles, bounds })
    }

    /// Axis-aligned box with outward-facing counter-clockwise triangles.
    pub fn cuboid(min: Vec3, max: Vec3) -> Self {
        let v = |x: bool, y: bool, z: bool| Vec3::new(if x { max.x } else { min.x }, if y { max.y } else { min.y }, if z { max.z } else { min.z });
        let vertices = vec![
            v(false, false, false),
            v(true, false, false),
            v(true, true, false),
            v(false, true, false),
            v(false, false, true),
            v(true, false, true),
            v(true, true, true),
            v(false, true, true),
        ];
        let quads = [[0, 3, 2, 1], [4, 5, 6, 7], [0, 4, 7, 3], [1, 2, 6, 5], [0, 1, 5, 4], [3, 7, 6, 2]];
        let triangles = quads.iter().flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]]).collect();
        Self::new(vertices, triangles).expect("cuboid is well formed")
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn bounds(&self) -> Aabb {
        self.bounds
    }

    pub fn triangle(&self, i: usize) -> [Vec3; 3] {
        let [a, b, c] = self.triangles[i];
        [self.vertices[a as usize], self.vertices[b as usize], self.vertices[c as usize]]
    }

    pub fn transformed(&self, t: &TransformTRS) -> Mesh {
        let vertices: Vec<Vec3> = self.vertices.iter().map(|&p| t.transform_point(p)).collect();
        let bounds = Aabb::from_points(vertices.iter().copied()).expect("non-empty");
        Mesh {
            vertices,
            triangles: self.triangles.clone(),
            bounds,
        }
    }

    /// Appends `other`'s geometry.
    pub fn merge(&mut self, other: &Mesh) {
        let base = self.vertices.len() as u32;
        self.vertices.extend_from_slice(&other.vertices);
        self.triangles.extend(other.triangles.iter().map(|t| t.map(|i| i + base)));
        self.bounds = Aabb::new(self.bounds.min.min(other.bounds.min), self.bounds.max.max(other.bounds.max));
    }

    pub fn to_obj(&self) -> String {
        let mut s = String::new();
        for v in &self.vertices {
            writeln!(s, "v {} {} {}", v.x, v.y, v.z).expect("string write");
        }
        for t in &self.triangles {
            writeln!(s, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1).expect("string write");
        }
        s
    }

    pub fn to_ply(&self) -> String {
        let mut s = format!(
            "ply\nformat ascii 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\nelement face {}\nproperty list uchar int vertex_indices\nend_header\n",
            self.vertices.len(),
            self.triangles.len()
        );
        for v in &self.vertices {
            writeln!(s, "{} {} {}", v.x, v.y, v.z).expect("string write");
        }
        for t in &self.triangles {
            writeln!(s, "3 {} {} {}", t[0], t[1], t[2]).expect("string write");
        }
        s
    }

    pub fn encode(&self, format: MeshFormat) -> String {
        match format {
            MeshFormat::Obj => self.to_obj(),
            MeshFormat::Ply => self.to_ply(),
        }
    }
}

/// Parses an ASCII OBJ or PLY mesh. Polygons are fan-triangulated.
pub fn load_mesh(bytes: &[u8], format: MeshFormat) -> Result<Mesh, MeshError> {
    let text = std::str::from_utf8(bytes).map_err(|e| {
        let line = bytes[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count() + 1;
        parse_err(line, "invalid UTF-8")
    })?;
    match format {
        MeshFormat::Obj => parse_obj(text),
        MeshFormat::Ply => parse_ply(text),
    }
}

fn parse_f64(tok: Option<&str>, line: usize, what: &str) -> Result<f64, MeshError> {
    let tok = tok.ok_or_else(|| parse_err(line, format!("missing {what}")))?;
    let v: f64 = tok.parse().map_err(|_| parse_err(line, format!("bad {what} `{tok}`")))?;
    if v.is_finite() { Ok(v) } else { Err(parse_err(line, format!("non-finite {what}"))) }
}

fn fan(poly: &[u32], out: &mut Vec<[u32; 3]>) {
    for k in 1..poly.len() - 1 {
        out.push([poly[0], poly[k], poly[k + 1]]);
    }
}

fn parse_obj(text: &str) -> Result<Mesh, MeshError> {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let content = raw.split('#').next().unwrap_or("");
        let mut toks = content.split_whitespace();
        match toks.next() {
            Some("v") => {
                let x = parse_f64(toks.next(), line, "x")?;
                let y = parse_f64(toks.next(), line, "y")?;
                let z = parse_f64(toks.next(), line, "z")?;
                vertices.push(Vec3::new(x, y, z));
            }
            Some("f") => {
                let mut poly = Vec::new();
                for tok in toks {
                    let first = tok.split('/').next().unwrap_or("");
                    let idx: i64 = first.parse().map_err(|_| parse_err(line, format!("bad face index `{tok}`")))?;
                    let count = vertices.len() as i64;
                    let resolved = if idx > 0 { idx - 1 } else { count + idx };
                    if idx == 0 || resolved < 0 || resolved >= count {
                        return Err(MeshError::IndexOutOfRange {
                            line,
                            index: idx,
                            vertex_count: vertices.len(),
                        });
                    }
                    poly.push(resolved as u32);
                }
                if poly.len() < 3 {
                    return Err(parse_err(line, "face needs at least 3 vertices"));
                }
                fan(&poly, &mut triangles);
            }
            _ => {}
        }
    }
    Mesh::new(vertices, triangles)
}

struct PlyElement {
    name: String,
    count: usize,
    props: Vec<String>,
    list: bool,
}

fn parse_ply(text: &str) -> Result<Mesh, MeshError> {
    let mut lines = text.lines().enumerate().map(|(n, l)| (n + 1, l.trim()));
    match lines.next() {
        Some((_, "ply")) => {}
        _ => return Err(parse_err(1, "missing `ply` magic")),
    }
    let mut elements: Vec<PlyElement> = Vec::new();
    loop {
        let (line, l) = lines.next().ok_or_else(|| parse_err(0, "missing end_header"))?;
        let toks: Vec<&str> = l.split_whitespace().collect();
        match toks.as_slice() {
            ["format", "ascii", _] => {}
            ["format", other, ..] => return Err(parse_err(line, format!("unsupported format `{other}`, only ascii"))),
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => elements.push(PlyElement {
                name: name.to_string(),
                count: count.parse().map_err(|_| parse_err(line, format!("bad element count `{count}`")))?,
                props: Vec::new(),
                list: false,
            }),
            ["property", "list", _, _, name] => {
                let e = elements.last_mut().ok_or_else(|| parse_err(line, "property before element"))?;
                e.props.push(name.to_string());
                e.list = true;
            }
            ["property", _, name] => {
                let e = elements.last_mut().ok_or_else(|| parse_err(line, "property before element"))?;
                e.props.push(name.to_string());
            }
            ["end_header"] => break,
            _ => return Err(parse_err(line, format!("unexpected header line `{l}`"))),
        }
    }
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for e in &elements {
        let pos = |name: &str| e.props.iter().position(|p| p == name);
        for _ in 0..e.count {
            let (line, l) = lines.next().ok_or_else(|| parse_err(0, format!("truncated `{}` element data", e.name)))?;
            let toks: Vec<&str> = l.split_whitespace().collect();
            match e.name.as_str() {
                "vertex" => {
                    let (Some(xi), Some(yi), Some(zi)) = (pos("x"), pos("y"), pos("z")) else {
                        return Err(parse_err(line, "vertex element lacks x/y/z"));
                    };
                    let get = |i: usize, what| parse_f64(toks.get(i).copied(), line, what);
                    vertices.push(Vec3::new(get(xi, "x")?, get(yi, "y")?, get(zi, "z")?));
                }
                "face" if e.list => {
                    let n: usize = toks
                        .first()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| parse_err(line, "bad face vertex count"))?;
                    if n < 3 || toks.len() < n + 1 {
                        return Err(parse_err(line, "face needs at least 3 listed vertices"));
                    }
                    let mut poly = Vec::with_capacity(n);
                    for t in &toks[1..=n] {
                        let idx: i64 = t.parse().map_err(|_| parse_err(line, format!("bad face index `{t}`")))?;
                        if idx < 0 || idx as usize >= e_vertex_count(&elements) {
                            return Err(MeshError::IndexOutOfRange {
                                line,
                                index: idx,
                                vertex_count: e_vertex_count(&elements),
                            });
                        }
                        poly.push(idx as u32);
                    }
                    fan(&poly, &mut triangles);
                }
                _ => {}
            }
        }
    }
    Mesh::new(vertices, triangles)
}

fn e_vertex_count(elements: &[PlyElement]) -> usize {
    elements.iter().find(|e| e.name == "vertex").map_or(0, |e| e.count)
}
