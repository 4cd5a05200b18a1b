use std::collections::HashMap;

use super::Mesh;
use crate::error::{DgError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct InteriorFace {
    pub elements: [usize; 2],
    pub faces: [usize; 2],
    /// Whether the two sides traverse the face in opposite directions.
    pub reversed: bool,
    /// Translation taking side-0 coordinates to side-1 coordinates (nonzero on periodic faces).
    pub shift: [f64; 2],
}

impl InteriorFace {
    /// Pairs points given by face parameters on side 0 with the matching
    /// points on side 1: entry `j` is the side-1 index of side-0 point `j`.
    pub fn pairing(&self, params: &[f64]) -> Vec<usize> {
        pair_params(params, self.reversed)
    }
}

/// Matches points with parameters `t` against `±t` on the opposite side.
pub(crate) fn pair_params(params: &[f64], reversed: bool) -> Vec<usize> {
    params
        .iter()
        .map(|&t| {
            let target = if reversed { -t } else { t };
            params
                .iter()
                .enumerate()
                .min_by(|a, b| (a.1 - target).abs().total_cmp(&(b.1 - target).abs()))
                .map(|(i, _)| i)
                .unwrap_or(0)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFace {
    pub element: usize,
    pub face: usize,
    pub tag: String,
}

/// What lies across local face `e` of element `k`.
#[derive(Debug, Clone, PartialEq)]
pub enum FaceLink {
    Interior {
        element: usize,
        face: usize,
        reversed: bool,
        shift: [f64; 2],
    },
    Boundary {
        index: usize,
    },
}

#[derive(Debug, Clone)]
pub struct Connectivity {
    pub nfaces: usize,
    pub interior_faces: Vec<InteriorFace>,
    pub boundary_faces: Vec<BoundaryFace>,
    /// Indexed by `k * nfaces + e`.
    pub links: Vec<FaceLink>,
    pub dual_edges: Vec<(usize, usize)>,
    /// Elements touching each vertex, with periodic images identified.
    pub vertex_patches: Vec<Vec<usize>>,
}

impl Connectivity {
    pub fn link(&self, k: usize, e: usize) -> &FaceLink {
        &self.links[k * self.nfaces + e]
    }

    /// Number of interior faces of element `k` (its degree in the dual graph).
    pub fn degree(&self, k: usize) -> usize {
        (0..self.nfaces)
            .filter(|&e| matches!(self.link(k, e), FaceLink::Interior { .. }))
            .count()
    }
}

fn face_key(vs: &[usize]) -> [usize; 2] {
    match vs {
        [a] => [*a, usize::MAX],
        [a, b] => [(*a).min(*b), (*a).max(*b)],
        _ => unreachable!("faces have one or two vertices"),
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut i: usize) -> usize {
        while self.0[i] != i {
            self.0[i] = self.0[self.0[i]];
            i = self.0[i];
        }
        i
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Builds face connectivity. Each pair `(a, b)` in `periodic` glues the
/// faces tagged `a` to those tagged `b` by the translation between the
/// two tag centroids.
pub fn build_connectivity(mesh: &Mesh, periodic: &[(String, String)]) -> Result<Connectivity> {
    let nf = mesh.nfaces();
    let k_total = mesh.num_elements();
    let mut faces: HashMap<[usize; 2], Vec<(usize, usize)>> = HashMap::with_capacity(k_total * nf);
    let mut order: Vec<[usize; 2]> = Vec::with_capacity(k_total * nf);
    for k in 0..k_total {
        for e in 0..nf {
            let key = face_key(&mesh.face_vertices(k, e));
            let entry = faces.entry(key).or_default();
            if entry.is_empty() {
                order.push(key);
            }
            entry.push((k, e));
        }
    }

    for key in &order {
        let count = faces[key].len();
        if count > 2 {
            return Err(DgError::NonConforming {
                count,
                vertices: key.iter().copied().filter(|&v| v != usize::MAX).collect(),
            });
        }
    }

    let mut tags: HashMap<[usize; 2], &str> = HashMap::new();
    for b in &mesh.boundary {
        let key = face_key(&b.vertices);
        if let Some(prev) = tags.insert(key, &b.tag) {
            if prev != b.tag {
                return Err(DgError::InvalidMesh(format!(
                    "boundary face {:?} carries two tags '{prev}' and '{}'",
                    b.vertices, b.tag
                )));
            }
        }
        match faces.get(&key).map(Vec::len) {
            Some(1) => {}
            _ => {
                return Err(DgError::InvalidMesh(format!(
                    "tag '{}' is attached to {:?}, which is not a boundary face",
                    b.tag, b.vertices
                )))
            }
        }
    }

    let mut links = vec![FaceLink::Boundary { index: usize::MAX }; k_total * nf];
    let mut interior_faces = Vec::new();
    let mut boundary_faces = Vec::new();
    for key in &order {
        let sides = &faces[key];
        match sides.len() {
            1 => {
                let (k, e) = sides[0];
                let tag = tags
                    .get(key)
                    .ok_or(DgError::UntaggedBoundary { element: k, face: e })?;
                links[k * nf + e] = FaceLink::Boundary { index: boundary_faces.len() };
                boundary_faces.push(BoundaryFace { element: k, face: e, tag: tag.to_string() });
            }
            _ => {
                let (k0, e0) = sides[0];
                let (k1, e1) = sides[1];
                let reversed = if mesh.dim == 1 {
                    if e0 == e1 {
                        return Err(DgError::InvalidMesh(format!("elements {k0} and {k1} overlap")));
                    }
                    false
                } else {
                    let a = mesh.face_vertices(k0, e0);
                    let b = mesh.face_vertices(k1, e1);
                    if a[0] == b[0] {
                        return Err(DgError::InvalidMesh(format!("elements {k0} and {k1} overlap")));
                    }
                    true
                };
                interior_faces.push(InteriorFace {
                    elements: [k0, k1],
                    faces: [e0, e1],
                    reversed,
                    shift: [0.0; 2],
                });
            }
        }
    }
    if mesh.dim == 2 {
        check_hanging_nodes(mesh, &boundary_faces)?;
    }

    let mut uf = UnionFind((0..mesh.vertices.len()).collect());
    let mut glued = vec![false; boundary_faces.len()];
    for (a, b) in periodic {
        glue_periodic(mesh, &boundary_faces, a, b, &mut glued, &mut interior_faces, &mut uf)?;
    }
    let kept: Vec<BoundaryFace> = boundary_faces
        .into_iter()
        .zip(&glued)
        .filter_map(|(bf, &g)| (!g).then_some(bf))
        .collect();
    for (i, bf) in kept.iter().enumerate() {
        links[bf.element * nf + bf.face] = FaceLink::Boundary { index: i };
    }

    let mut dual_edges = Vec::with_capacity(interior_faces.len());
    for f in &interior_faces {
        let [k0, k1] = f.elements;
        let [e0, e1] = f.faces;
        links[k0 * nf + e0] = FaceLink::Interior { element: k1, face: e1, reversed: f.reversed, shift: f.shift };
        links[k1 * nf + e1] = FaceLink::Interior {
            element: k0,
            face: e0,
            reversed: f.reversed,
            shift: [-f.shift[0], -f.shift[1]],
        };
        dual_edges.push((k0, k1));
    }

    let mut by_root: HashMap<usize, Vec<usize>> = HashMap::new();
    for (k, el) in mesh.elements.iter().enumerate() {
        for &v in el {
            let r = uf.find(v);
            let list = by_root.entry(r).or_default();
            if !list.contains(&k) {
                list.push(k);
            }
        }
    }
    let vertex_patches = (0..mesh.vertices.len())
        .map(|v| {
            let r = uf.find(v);
            let mut list = by_root.get(&r).cloned().unwrap_or_default();
            list.sort_unstable();
            list
        })
        .collect();

    Ok(Connectivity { nfaces: nf, interior_faces, boundary_faces: kept, links, dual_edges, vertex_patches })
}

fn centroid(mesh: &Mesh, bf: &BoundaryFace) -> [f64; 2] {
    let vs = mesh.face_vertices(bf.element, bf.face);
    let n = vs.len() as f64;
    let mut c = [0.0; 2];
    for v in vs {
        c[0] += mesh.vertices[v][0] / n;
        c[1] += mesh.vertices[v][1] / n;
    }
    c
}

#[allow(clippy::too_many_arguments)]
fn glue_periodic(
    mesh: &Mesh,
    boundary: &[BoundaryFace],
    a: &str,
    b: &str,
    glued: &mut [bool],
    interior: &mut Vec<InteriorFace>,
    uf: &mut UnionFind,
) -> Result<()> {
    let mismatch = |reason: String| DgError::PeriodicMismatch { a: a.into(), b: b.into(), reason };
    let side_a: Vec<usize> = (0..boundary.len()).filter(|&i| boundary[i].tag == a).collect();
    let side_b: Vec<usize> = (0..boundary.len()).filter(|&i| boundary[i].tag == b).collect();
    if side_a.is_empty() || a == b {
        return Err(mismatch("tags must be distinct and present".into()));
    }
    if side_a.len() != side_b.len() {
        return Err(mismatch(format!("{} faces vs {}", side_a.len(), side_b.len())));
    }
    if side_a.iter().chain(&side_b).any(|&i| glued[i]) {
        return Err(mismatch("faces already glued".into()));
    }
    let mean = |ids: &[usize]| {
        let mut c = [0.0; 2];
        for &i in ids {
            let p = centroid(mesh, &boundary[i]);
            c[0] += p[0] / ids.len() as f64;
            c[1] += p[1] / ids.len() as f64;
        }
        c
    };
    let (ca, cb) = (mean(&side_a), mean(&side_b));
    let shift = [cb[0] - ca[0], cb[1] - ca[1]];
    let tol = 1e-8 * mesh.scale();
    let close = |p: [f64; 2], q: [f64; 2]| (p[0] - q[0]).abs() <= tol && (p[1] - q[1]).abs() <= tol;
    let mut used = vec![false; side_b.len()];
    for &ia in &side_a {
        let pa = centroid(mesh, &boundary[ia]);
        let target = [pa[0] + shift[0], pa[1] + shift[1]];
        let j = (0..side_b.len())
            .find(|&j| !used[j] && close(centroid(mesh, &boundary[side_b[j]]), target))
            .ok_or_else(|| mismatch(format!("no partner for face at {pa:?}")))?;
        used[j] = true;
        let ib = side_b[j];
        let (fa, fb) = (&boundary[ia], &boundary[ib]);
        let va = mesh.face_vertices(fa.element, fa.face);
        let vb = mesh.face_vertices(fb.element, fb.face);
        let moved = |v: usize| [mesh.vertices[v][0] + shift[0], mesh.vertices[v][1] + shift[1]];
        let reversed = if mesh.dim == 1 {
            uf.union(va[0], vb[0]);
            false
        } else if close(moved(va[0]), mesh.vertices[vb[1]]) && close(moved(va[1]), mesh.vertices[vb[0]]) {
            uf.union(va[0], vb[1]);
            uf.union(va[1], vb[0]);
            true
        } else if close(moved(va[0]), mesh.vertices[vb[0]]) && close(moved(va[1]), mesh.vertices[vb[1]]) {
            uf.union(va[0], vb[0]);
            uf.union(va[1], vb[1]);
            false
        } else {
            return Err(mismatch("face vertices do not match under translation".into()));
        };
        glued[ia] = true;
        glued[ib] = true;
        interior.push(InteriorFace {
            elements: [fa.element, fb.element],
            faces: [fa.face, fb.face],
            reversed,
            shift,
        });
    }
    Ok(())
}

fn check_hanging_nodes(mesh: &Mesh, boundary: &[BoundaryFace]) -> Result<()> {
    if boundary.is_empty() {
        return Ok(());
    }
    let scale = mesh.scale();
    let n = mesh.vertices.len().max(1) as f64;
    let cell = scale / n.sqrt().max(1.0);
    let bucket = |p: [f64; 2]| ((p[0] / cell).floor() as i64, (p[1] / cell).floor() as i64);
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, &p) in mesh.vertices.iter().enumerate() {
        grid.entry(bucket(p)).or_default().push(i);
    }
    let tol = 1e-10 * scale;
    for bf in boundary {
        let vs = mesh.face_vertices(bf.element, bf.face);
        let (p, q) = (mesh.vertices[vs[0]], mesh.vertices[vs[1]]);
        let (lo, hi) = (bucket([p[0].min(q[0]), p[1].min(q[1])]), bucket([p[0].max(q[0]), p[1].max(q[1])]));
        let d = [q[0] - p[0], q[1] - p[1]];
        let len2 = d[0] * d[0] + d[1] * d[1];
        for bx in lo.0 - 1..=hi.0 + 1 {
            for by in lo.1 - 1..=hi.1 + 1 {
                let Some(cands) = grid.get(&(bx, by)) else { continue };
                for &v in cands {
                    if v == vs[0] || v == vs[1] {
                        continue;
                    }
                    let r = [mesh.vertices[v][0] - p[0], mesh.vertices[v][1] - p[1]];
                    let t = (r[0] * d[0] + r[1] * d[1]) / len2;
                    let dist = (r[0] * d[1] - r[1] * d[0]).abs() / len2.sqrt();
                    if t > 1e-12 && t < 1.0 - 1e-12 && dist <= tol {
                        return Err(DgError::HangingNode { vertex: v });
                    }
                }
            }
        }
    }
    Ok(())
}
