use std::collections::HashMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{generate, BoundaryTag, Mesh};
use crate::error::{DgError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeshFormat {
    GmshAsciiV2,
    InternalJson,
    Uniform1d,
}

impl FromStr for MeshFormat {
    type Err = DgError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gmsh" | "gmsh-ascii-v2" | "msh" => Ok(Self::GmshAsciiV2),
            "json" | "internal-json" => Ok(Self::InternalJson),
            "uniform-1d" => Ok(Self::Uniform1d),
            other => Err(DgError::Config(format!("unknown mesh format '{other}'"))),
        }
    }
}

pub fn parse_mesh(text: &str, format: MeshFormat) -> Result<Mesh> {
    match format {
        MeshFormat::GmshAsciiV2 => parse_gmsh(text),
        MeshFormat::InternalJson => parse_json(text),
        MeshFormat::Uniform1d => parse_uniform_1d(text),
    }
}

/// Parses `x_min x_max K` into `K` equal segments tagged `left` and `right`.
pub fn parse_uniform_1d(text: &str) -> Result<Mesh> {
    let mut tokens = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let content = line.split('#').next().unwrap_or("");
        tokens.extend(content.split_whitespace().map(|t| (i + 1, t)));
    }
    let err = |line: usize, message: String| DgError::Parse { line, message };
    if tokens.len() != 3 {
        let line = tokens.last().map_or(1, |t| t.0);
        return Err(err(line, format!("expected 'x_min x_max K', found {} tokens", tokens.len())));
    }
    let x0: f64 = tokens[0].1.parse().map_err(|_| err(tokens[0].0, format!("bad x_min '{}'", tokens[0].1)))?;
    let x1: f64 = tokens[1].1.parse().map_err(|_| err(tokens[1].0, format!("bad x_max '{}'", tokens[1].1)))?;
    let k: usize = tokens[2].1.parse().map_err(|_| err(tokens[2].0, format!("bad element count '{}'", tokens[2].1)))?;
    if !(x0.is_finite() && x1.is_finite()) || x1 <= x0 {
        return Err(err(tokens[0].0, "interval must satisfy x_min < x_max".into()));
    }
    if k == 0 || k > 10_000_000 {
        return Err(err(tokens[2].0, format!("element count {k} out of range")));
    }
    generate::uniform_1d(x0, x1, k)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonMesh {
    schema: String,
    dim: usize,
    vertices: Vec<Vec<f64>>,
    elements: Vec<Vec<usize>>,
    #[serde(default)]
    boundary: Vec<JsonBoundary>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonBoundary {
    face: Vec<usize>,
    tag: String,
}

pub const MESH_SCHEMA: &str = "mesh/1";

/// Parses the internal JSON mesh schema (`schema: "mesh/1"`).
pub fn parse_json(text: &str) -> Result<Mesh> {
    let raw: JsonMesh = serde_json::from_str(text).map_err(|e| DgError::Parse {
        line: e.line(),
        message: format!("{e}"),
    })?;
    if raw.schema != MESH_SCHEMA {
        return Err(DgError::Parse { line: 1, message: format!("unsupported schema '{}'", raw.schema) });
    }
    if raw.dim != 1 && raw.dim != 2 {
        return Err(DgError::InvalidMesh(format!("dimension {} not supported", raw.dim)));
    }
    let vertices = raw
        .vertices
        .iter()
        .enumerate()
        .map(|(i, v)| match (raw.dim, v.as_slice()) {
            (1, [x]) => Ok([*x, 0.0]),
            (2, [x, y]) => Ok([*x, *y]),
            _ => Err(DgError::InvalidMesh(format!("vertex {i} has {} coordinates, expected {}", v.len(), raw.dim))),
        })
        .collect::<Result<Vec<_>>>()?;
    let boundary = raw
        .boundary
        .into_iter()
        .map(|b| BoundaryTag { vertices: b.face, tag: b.tag })
        .collect();
    Mesh::new(raw.dim, vertices, raw.elements, boundary)
}

pub fn to_json(mesh: &Mesh) -> String {
    let raw = JsonMesh {
        schema: MESH_SCHEMA.into(),
        dim: mesh.dim,
        vertices: mesh.vertices.iter().map(|v| v[..mesh.dim].to_vec()).collect(),
        elements: mesh.elements.clone(),
        boundary: mesh
            .boundary
            .iter()
            .map(|b| JsonBoundary { face: b.vertices.clone(), tag: b.tag.clone() })
            .collect(),
    };
    serde_json::to_string_pretty(&raw).expect("mesh serializes")
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Self { inner: text.lines().enumerate(), line: 0 }
    }

    fn next_line(&mut self) -> Option<&'a str> {
        self.inner.next().map(|(i, l)| {
            self.line = i + 1;
            l.trim()
        })
    }

    fn expect_line(&mut self, what: &str) -> Result<&'a str> {
        let line = self.line;
        self.next_line().ok_or_else(|| DgError::Parse {
            line: line + 1,
            message: format!("unexpected end of file, expected {what}"),
        })
    }

    fn err(&self, message: impl Into<String>) -> DgError {
        DgError::Parse { line: self.line, message: message.into() }
    }

    fn count(&mut self, what: &str) -> Result<usize> {
        let l = self.expect_line(what)?;
        let n: usize = l.parse().map_err(|_| self.err(format!("invalid {what} '{l}'")))?;
        if n > 50_000_000 {
            return Err(self.err(format!("{what} {n} too large")));
        }
        Ok(n)
    }

    fn end(&mut self, section: &str) -> Result<()> {
        let l = self.expect_line(section)?;
        if l != section {
            return Err(self.err(format!("expected {section}, found '{l}'")));
        }
        Ok(())
    }
}

fn nodes_for_type(kind: u32) -> Option<(usize, usize)> {
    // (topological dimension, node count)
    match kind {
        15 => Some((0, 1)),
        1 => Some((1, 2)),
        2 => Some((2, 3)),
        _ => None,
    }
}

struct RawElement {
    dim: usize,
    physical: Option<i64>,
    nodes: Vec<u64>,
}

/// Parses the ASCII Gmsh v2.2 subset: points, lines and triangles with
/// physical tags. Boundary tags come from entities one dimension below the
/// mesh, named by `$PhysicalNames` when present.
pub fn parse_gmsh(text: &str) -> Result<Mesh> {
    let mut lines = Lines::new(text);
    let mut saw_format = false;
    let mut names: HashMap<(usize, i64), String> = HashMap::new();
    let mut node_order: Vec<u64> = Vec::new();
    let mut node_xy: HashMap<u64, [f64; 2]> = HashMap::new();
    let mut raw: Vec<RawElement> = Vec::new();

    while let Some(l) = lines.next_line() {
        if l.is_empty() {
            continue;
        }
        match l {
            "$MeshFormat" => {
                let header = lines.expect_line("format header")?;
                let mut it = header.split_whitespace();
                let version = it.next().unwrap_or("");
                let file_type = it.next().unwrap_or("");
                if !version.starts_with("2.") {
                    return Err(lines.err(format!("unsupported format version '{version}'")));
                }
                if file_type != "0" {
                    return Err(lines.err("only ASCII files are supported"));
                }
                lines.end("$EndMeshFormat")?;
                saw_format = true;
            }
            "$PhysicalNames" => {
                let n = lines.count("physical name count")?;
                for _ in 0..n {
                    let entry = lines.expect_line("physical name")?;
                    let mut it = entry.splitn(3, char::is_whitespace);
                    let d: usize = it
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| lines.err("invalid physical dimension"))?;
                    let tag: i64 = it
                        .next()
                        .and_then(|s| s.trim().parse().ok())
                        .ok_or_else(|| lines.err("invalid physical tag"))?;
                    let name = it.next().unwrap_or("").trim().trim_matches('"').to_string();
                    names.insert((d, tag), name);
                }
                lines.end("$EndPhysicalNames")?;
            }
            "$Nodes" => {
                let n = lines.count("node count")?;
                node_order.reserve(n.min(1 << 20));
                for _ in 0..n {
                    let entry = lines.expect_line("node")?;
                    let f: Vec<&str> = entry.split_whitespace().collect();
                    if f.len() < 4 {
                        return Err(lines.err("node line needs id x y z"));
                    }
                    let id: u64 = f[0].parse().map_err(|_| lines.err(format!("invalid node id '{}'", f[0])))?;
                    let mut xy = [0.0; 2];
                    for d in 0..2 {
                        xy[d] = f[1 + d]
                            .parse()
                            .map_err(|_| lines.err(format!("invalid coordinate '{}'", f[1 + d])))?;
                    }
                    if node_xy.insert(id, xy).is_some() {
                        return Err(lines.err(format!("duplicate node id {id}")));
                    }
                    node_order.push(id);
                }
                lines.end("$EndNodes")?;
            }
            "$Elements" => {
                let n = lines.count("element count")?;
                for _ in 0..n {
                    let entry = lines.expect_line("element")?;
                    let f: Vec<&str> = entry.split_whitespace().collect();
                    if f.len() < 3 {
                        return Err(lines.err("element line too short"));
                    }
                    let kind: u32 = f[1].parse().map_err(|_| lines.err(format!("invalid element type '{}'", f[1])))?;
                    let (dim, nn) = nodes_for_type(kind)
                        .ok_or(DgError::UnsupportedElementType { line: lines.line, kind })?;
                    let ntags: usize = f[2].parse().map_err(|_| lines.err("invalid tag count"))?;
                    if f.len() != 3 + ntags + nn {
                        return Err(lines.err(format!(
                            "element line has {} fields, expected {}",
                            f.len(),
                            3 + ntags + nn
                        )));
                    }
                    let physical = if ntags > 0 {
                        Some(f[3].parse::<i64>().map_err(|_| lines.err("invalid physical tag"))?)
                    } else {
                        None
                    };
                    let nodes = f[3 + ntags..]
                        .iter()
                        .map(|s| s.parse::<u64>().map_err(|_| lines.err(format!("invalid node id '{s}'"))))
                        .collect::<Result<Vec<_>>>()?;
                    raw.push(RawElement { dim, physical, nodes });
                }
                lines.end("$EndElements")?;
            }
            other if other.starts_with("$End") => {
                return Err(lines.err(format!("unexpected '{other}'")));
            }
            other if other.starts_with('$') => {
                let end = format!("$End{}", &other[1..]);
                loop {
                    let l = lines.expect_line(&end)?;
                    if l == end {
                        break;
                    }
                }
            }
            other => return Err(lines.err(format!("unexpected content '{other}'"))),
        }
    }
    if !saw_format {
        return Err(DgError::Parse { line: 1, message: "missing $MeshFormat section".into() });
    }
    let dim = raw.iter().map(|e| e.dim).max().unwrap_or(0);
    if dim == 0 {
        return Err(DgError::InvalidMesh("no line or triangle elements".into()));
    }

    let mut used: HashMap<u64, usize> = HashMap::new();
    for e in raw.iter().filter(|e| e.dim + 1 >= dim) {
        for id in &e.nodes {
            if !node_xy.contains_key(id) {
                return Err(DgError::InvalidMesh(format!("element references unknown node {id}")));
            }
            used.insert(*id, usize::MAX);
        }
    }
    let mut vertices = Vec::with_capacity(used.len());
    for id in &node_order {
        if let Some(slot) = used.get_mut(id) {
            *slot = vertices.len();
            vertices.push(node_xy[id]);
        }
    }
    let elements: Vec<Vec<usize>> = raw
        .iter()
        .filter(|e| e.dim == dim)
        .map(|e| e.nodes.iter().map(|id| used[id]).collect())
        .collect();
    let boundary: Vec<BoundaryTag> = raw
        .iter()
        .filter(|e| e.dim + 1 == dim)
        .filter_map(|e| {
            e.physical.map(|p| BoundaryTag {
                vertices: e.nodes.iter().map(|id| used[id]).collect(),
                tag: names.get(&(e.dim, p)).cloned().unwrap_or_else(|| p.to_string()),
            })
        })
        .collect();
    Mesh::new(dim, vertices, elements, boundary)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQUARE: &str = "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$PhysicalNames\n2\n1 1 \"wall\"\n2 2 \"fluid\"\n$EndPhysicalNames\n$Nodes\n4\n1 0 0 0\n2 1 0 0\n3 1 1 0\n4 0 1 0\n$EndNodes\n$Elements\n6\n1 1 2 1 1 1 2\n2 1 2 1 1 2 3\n3 1 2 1 1 3 4\n4 1 2 1 1 4 1\n5 2 2 2 1 1 2 3\n6 2 2 2 1 1 3 4\n$EndElements\n";

    #[test]
    fn gmsh_square() {
        let m = parse_gmsh(SQUARE).unwrap();
        assert_eq!(m.dim, 2);
        assert_eq!(m.elements.len(), 2);
        assert_eq!(m.vertices.len(), 4);
        assert_eq!(m.boundary.len(), 4);
        assert!(m.boundary.iter().all(|b| b.tag == "wall"));
    }

    #[test]
    fn gmsh_quad_rejected() {
        let text = SQUARE.replace("6 2 2 2 1 1 3 4", "6 3 2 2 1 1 2 3 4");
        let err = parse_gmsh(&text).unwrap_err();
        assert!(matches!(err, DgError::UnsupportedElementType { kind: 3, .. }), "{err}");
        assert!(err.to_string().contains("unsupported element type"));
    }

    #[test]
    fn gmsh_reports_line_numbers() {
        let text = SQUARE.replace("2 1 0 0", "2 1 zero 0");
        match parse_gmsh(&text).unwrap_err() {
            DgError::Parse { line, .. } => assert_eq!(line, 12),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn json_round_trip() {
        let m = parse_gmsh(SQUARE).unwrap();
        let back = parse_json(&to_json(&m)).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn json_rejects_unknown_keys() {
        let text = r#"{"schema":"mesh/1","dim":1,"vertices":[[0],[1]],"elements":[[0,1]],"extra":1}"#;
        assert!(matches!(parse_json(text), Err(DgError::Parse { .. })));
    }

    #[test]
    fn uniform_spec() {
        let m = parse_uniform_1d("0 1 250").unwrap();
        assert_eq!(m.elements.len(), 250);
        assert_eq!(m.vertices.len(), 251);
        assert!(parse_uniform_1d("1 0 3").is_err());
        assert!(parse_uniform_1d("0 1").is_err());
    }
}
