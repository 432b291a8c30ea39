//! Closed genus-0 triangle meshes.

use std::collections::{HashMap, VecDeque};

use crate::error::{Error, Result};
use crate::par;
use crate::Vec3;

/// Relative area threshold below which a face counts as degenerate, scaled by the
/// squared bounding-box diagonal.
pub const DEGENERATE_AREA_FACTOR: f64 = 1e-12;

/// Compressed adjacency lists: `items[offsets[i]..offsets[i + 1]]` belong to `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Adjacency {
    offsets: Vec<usize>,
    items: Vec<usize>,
}

impl Adjacency {
    fn from_lists(lists: Vec<Vec<usize>>) -> Self {
        let mut offsets = Vec::with_capacity(lists.len() + 1);
        let mut items = Vec::new();
        offsets.push(0);
        for l in lists {
            items.extend(l);
            offsets.push(items.len());
        }
        Self { offsets, items }
    }

    pub fn get(&self, i: usize) -> &[usize] {
        &self.items[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Indexed closed manifold triangle mesh with consistent outward orientation.
#[derive(Debug, Clone)]
pub struct TriMesh {
    vertices: Vec<Vec3>,
    faces: Vec<[usize; 3]>,
    edges: Vec<[usize; 2]>,
    vertex_faces: Adjacency,
    vertex_neighbors: Adjacency,
}

impl TriMesh {
    /// Validates a face set and builds the derived tables.
    ///
    /// Faces are re-oriented consistently by a breadth-first sweep and flipped
    /// globally if the enclosed signed volume is negative.
    pub fn new(vertices: Vec<Vec3>, mut faces: Vec<[usize; 3]>) -> Result<Self> {
        let nv = vertices.len();
        if faces.is_empty() {
            return Err(Error::Topology("mesh has no faces".into()));
        }
        for (fi, f) in faces.iter().enumerate() {
            if f.iter().any(|&v| v >= nv) {
                return Err(Error::Topology(format!("face {fi} references a missing vertex")));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::Topology(format!("face {fi} repeats a vertex")));
            }
        }

        let edge_faces = undirected_edge_faces(&faces);
        for (&(a, b), fs) in &edge_faces {
            match fs.len() {
                2 => {}
                1 => return Err(Error::Topology(format!("boundary edge found ({a}, {b})"))),
                n => {
                    return Err(Error::Topology(format!(
                        "non-manifold edge ({a}, {b}) shared by {n} faces"
                    )))
                }
            }
        }

        orient_consistently(&mut faces, &edge_faces)?;

        let ne = edge_faces.len();
        let chi = nv as i64 - ne as i64 + faces.len() as i64;
        if chi != 2 {
            return Err(Error::Topology(format!(
                "Euler characteristic is {chi}, expected 2 (genus 0, one component)"
            )));
        }

        let volume: f64 = faces
            .iter()
            .map(|f| vertices[f[0]].dot(&vertices[f[1]].cross(&vertices[f[2]])))
            .sum();
        if volume < 0.0 {
            for f in &mut faces {
                f.swap(1, 2);
            }
        }

        let diag = bounding_diagonal(&vertices);
        let threshold = DEGENERATE_AREA_FACTOR * diag * diag;
        for (fi, &area) in face_areas(&faces, &vertices).iter().enumerate() {
            if !(area >= threshold) {
                return Err(Error::DegenerateFace { face: fi, area });
            }
        }

        Ok(Self::assemble(vertices, faces))
    }

    /// Builds the derived tables without validation. The caller guarantees a closed,
    /// consistently oriented manifold (used for meshes derived from a validated one).
    pub(crate) fn assemble(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Self {
        let nv = vertices.len();
        let mut edges: Vec<[usize; 2]> = faces
            .iter()
            .flat_map(|f| [[f[0], f[1]], [f[1], f[2]], [f[2], f[0]]])
            .filter(|e| e[0] < e[1])
            .collect();
        edges.sort_unstable();
        edges.dedup();

        let mut vf = vec![Vec::new(); nv];
        for (fi, f) in faces.iter().enumerate() {
            for &v in f {
                vf[v].push(fi);
            }
        }
        let mut vn = vec![Vec::new(); nv];
        for e in &edges {
            vn[e[0]].push(e[1]);
            vn[e[1]].push(e[0]);
        }
        for l in &mut vn {
            l.sort_unstable();
        }
        Self {
            vertices,
            faces,
            edges,
            vertex_faces: Adjacency::from_lists(vf),
            vertex_neighbors: Adjacency::from_lists(vn),
        }
    }

    /// Same connectivity, new vertex positions.
    pub fn with_vertices(&self, vertices: Vec<Vec3>) -> Result<Self> {
        if vertices.len() != self.vertices.len() {
            return Err(Error::ConnectivityMismatch(format!(
                "expected {} positions, got {}",
                self.vertices.len(),
                vertices.len()
            )));
        }
        Ok(Self { vertices, ..self.clone() })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.num_vertices() as i64 - self.num_edges() as i64 + self.num_faces() as i64
    }

    /// Faces incident to each vertex.
    pub fn vertex_faces(&self) -> &Adjacency {
        &self.vertex_faces
    }

    /// Sorted 1-ring vertex neighbours.
    pub fn vertex_neighbors(&self) -> &Adjacency {
        &self.vertex_neighbors
    }

    pub fn face_areas(&self) -> Vec<f64> {
        face_areas(&self.faces, &self.vertices)
    }

    pub fn surface_area(&self) -> f64 {
        let areas = self.face_areas();
        par::sum(areas.len(), |i| areas[i])
    }

    pub fn bounding_diagonal(&self) -> f64 {
        bounding_diagonal(&self.vertices)
    }

    /// Whether two meshes share the same face list.
    pub fn same_connectivity(&self, other: &TriMesh) -> bool {
        self.vertices.len() == other.vertices.len() && self.faces == other.faces
    }
}

fn undirected_edge_faces(faces: &[[usize; 3]]) -> HashMap<(usize, usize), Vec<usize>> {
    let mut map: HashMap<(usize, usize), Vec<usize>> = HashMap::with_capacity(faces.len() * 2);
    for (fi, f) in faces.iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            map.entry((a.min(b), a.max(b))).or_default().push(fi);
        }
    }
    map
}

fn has_directed_edge(f: &[usize; 3], a: usize, b: usize) -> bool {
    (0..3).any(|k| f[k] == a && f[(k + 1) % 3] == b)
}

fn orient_consistently(
    faces: &mut [[usize; 3]],
    edge_faces: &HashMap<(usize, usize), Vec<usize>>,
) -> Result<()> {
    let nf = faces.len();
    let mut visited = vec![false; nf];
    let mut queue = VecDeque::new();
    visited[0] = true;
    queue.push_back(0);
    let mut reached = 1;
    while let Some(fi) = queue.pop_front() {
        let f = faces[fi];
        for k in 0..3 {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            for &g in &edge_faces[&(a.min(b), a.max(b))] {
                if g == fi {
                    continue;
                }
                // A consistent neighbour traverses the shared edge as b -> a.
                let consistent = has_directed_edge(&faces[g], b, a);
                if visited[g] {
                    if !consistent {
                        return Err(Error::Topology("mesh is not orientable".into()));
                    }
                } else {
                    if !consistent {
                        faces[g].swap(1, 2);
                    }
                    visited[g] = true;
                    reached += 1;
                    queue.push_back(g);
                }
            }
        }
    }
    if reached != nf {
        return Err(Error::Topology("mesh has more than one connected component".into()));
    }
    Ok(())
}

fn bounding_diagonal(vertices: &[Vec3]) -> f64 {
    let mut lo = Vec3::repeat(f64::INFINITY);
    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
    for v in vertices {
        lo = lo.inf(v);
        hi = hi.sup(v);
    }
    (hi - lo).norm()
}

/// Twice-area normal `(p1 - p0) x (p2 - p0)` of a face.
#[inline]
pub fn face_cross(f: &[usize; 3], positions: &[Vec3]) -> Vec3 {
    let p0 = positions[f[0]];
    (positions[f[1]] - p0).cross(&(positions[f[2]] - p0))
}

/// Area of every face by the cross-product formula.
pub fn face_areas(faces: &[[usize; 3]], positions: &[Vec3]) -> Vec<f64> {
    par::map_slice(faces, |f| 0.5 * face_cross(f, positions).norm())
}

/// Row-stochastic `|V| x |F|` face-to-vertex averaging operator.
///
/// Row `i` holds `Area(T_j) / sum of incident areas` for every face `T_j` incident
/// to vertex `i`, in the same order as [`TriMesh::vertex_faces`].
#[derive(Debug, Clone)]
pub struct FaceToVertexMatrix {
    offsets: Vec<usize>,
    faces: Vec<usize>,
    weights: Vec<f64>,
}

impl FaceToVertexMatrix {
    pub fn new(mesh: &TriMesh, positions: &[Vec3]) -> Result<Self> {
        let areas = face_areas(mesh.faces(), positions);
        Self::from_areas(mesh, &areas)
    }

    pub fn from_areas(mesh: &TriMesh, areas: &[f64]) -> Result<Self> {
        let vf = mesh.vertex_faces();
        let mut offsets = Vec::with_capacity(vf.len() + 1);
        let mut faces = Vec::with_capacity(vf.items.len());
        let mut weights = Vec::with_capacity(vf.items.len());
        offsets.push(0);
        for v in 0..vf.len() {
            let incident = vf.get(v);
            let total: f64 = incident.iter().map(|&f| areas[f]).sum();
            if !(total > 0.0) {
                return Err(Error::DegenerateFace {
                    face: incident.first().copied().unwrap_or(0),
                    area: total,
                });
            }
            for &f in incident {
                faces.push(f);
                weights.push(areas[f] / total);
            }
            offsets.push(faces.len());
        }
        Ok(Self { offsets, faces, weights })
    }

    pub fn num_rows(&self) -> usize {
        self.offsets.len() - 1
    }

    /// `(face, weight)` pairs of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.offsets[i]..self.offsets[i + 1];
        self.faces[r.clone()].iter().copied().zip(self.weights[r].iter().copied())
    }

    pub fn apply(&self, face_values: &[f64]) -> Vec<f64> {
        par::map_range(self.num_rows(), |i| self.row(i).map(|(f, w)| w * face_values[f]).sum())
    }

    pub fn apply_vec3(&self, face_values: &[Vec3]) -> Vec<Vec3> {
        par::map_range(self.num_rows(), |i| {
            self.row(i).fold(Vec3::zeros(), |acc, (f, w)| acc + face_values[f] * w)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;

    fn tetra() -> TriMesh {
        models::regular_tetrahedron()
    }

    #[test]
    fn tetrahedron_counts() {
        let m = tetra();
        assert_eq!((m.num_vertices(), m.num_edges(), m.num_faces()), (4, 6, 4));
        assert_eq!(m.euler_characteristic(), 2);
    }

    #[test]
    fn icosahedron_counts() {
        let m = models::icosahedron();
        assert_eq!((m.num_vertices(), m.num_edges(), m.num_faces()), (12, 30, 20));
    }

    #[test]
    fn single_triangle_is_open() {
        let v = vec![Vec3::zeros(), Vec3::x(), Vec3::y()];
        let err = TriMesh::new(v, vec![[0, 1, 2]]).unwrap_err();
        assert!(err.to_string().contains("boundary edge found"), "{err}");
    }

    #[test]
    fn inconsistent_orientation_is_repaired_outward() {
        let m = tetra();
        let mut faces = m.faces().to_vec();
        faces[1].swap(0, 1);
        faces[3].swap(1, 2);
        let fixed = TriMesh::new(m.vertices().to_vec(), faces).unwrap();
        for f in fixed.faces() {
            let c = (fixed.vertices()[f[0]] + fixed.vertices()[f[1]] + fixed.vertices()[f[2]]) / 3.0;
            assert!(face_cross(f, fixed.vertices()).dot(&c) > 0.0);
        }
    }

    #[test]
    fn degenerate_face_rejected() {
        // Vertex 3 on the segment (0, 1) makes face (0, 1, 3) collinear.
        let mut v = tetra().vertices().to_vec();
        v[3] = (v[0] + v[1]) * 0.5;
        let err = TriMesh::new(v, tetra().faces().to_vec()).unwrap_err();
        assert!(matches!(err, Error::DegenerateFace { .. }), "{err}");
    }

    #[test]
    fn two_components_rejected() {
        let t = tetra();
        let mut v = t.vertices().to_vec();
        v.extend(t.vertices().iter().map(|p| p + Vec3::new(5.0, 0.0, 0.0)));
        let mut f = t.faces().to_vec();
        f.extend(t.faces().iter().map(|f| [f[0] + 4, f[1] + 4, f[2] + 4]));
        assert!(matches!(TriMesh::new(v, f), Err(Error::Topology(_))));
    }

    #[test]
    fn analytic_areas() {
        let right = [Vec3::zeros(), Vec3::x(), Vec3::y()];
        assert_eq!(face_areas(&[[0, 1, 2]], &right)[0], 0.5);
        let eq = [Vec3::zeros(), Vec3::x(), Vec3::new(0.5, 3f64.sqrt() / 2.0, 0.0)];
        assert!((face_areas(&[[0, 1, 2]], &eq)[0] - 3f64.sqrt() / 4.0).abs() < 1e-15);
    }

    #[test]
    fn area_scales_quadratically() {
        let m = models::geodesic_sphere(3);
        let scaled: Vec<Vec3> = m.vertices().iter().map(|p| p * 2.5).collect();
        let a = m.face_areas();
        let b = face_areas(m.faces(), &scaled);
        for (x, y) in a.iter().zip(&b) {
            assert!((y - 6.25 * x).abs() < 1e-14 * y);
        }
    }

    #[test]
    fn face_to_vertex_tetrahedron() {
        let m = tetra();
        let fv = FaceToVertexMatrix::new(&m, m.vertices()).unwrap();
        for i in 0..4 {
            let row: Vec<_> = fv.row(i).collect();
            assert_eq!(row.len(), 3);
            for (_, w) in row {
                assert!((w - 1.0 / 3.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn face_to_vertex_six_equal_faces() {
        // Hexagonal fan of equal faces around vertex 0, closed by a second apex.
        let mut v = vec![Vec3::new(0.0, 0.0, 0.5)];
        for k in 0..6 {
            let t = k as f64 * std::f64::consts::PI / 3.0;
            v.push(Vec3::new(t.cos(), t.sin(), 0.0));
        }
        v.push(Vec3::new(0.0, 0.0, -0.5));
        let mut f = Vec::new();
        for k in 0..6 {
            f.push([0, 1 + k, 1 + (k + 1) % 6]);
            f.push([7, 1 + (k + 1) % 6, 1 + k]);
        }
        let m = TriMesh::new(v, f).unwrap();
        let fv = FaceToVertexMatrix::new(&m, m.vertices()).unwrap();
        let row: Vec<_> = fv.row(0).collect();
        assert_eq!(row.len(), 6);
        assert!(row.iter().all(|(_, w)| (w - 1.0 / 6.0).abs() < 1e-15));
    }

    #[test]
    fn face_to_vertex_rows_sum_to_one() {
        let m = models::bumpy_ellipsoid(6);
        let fv = FaceToVertexMatrix::new(&m, m.vertices()).unwrap();
        for i in 0..fv.num_rows() {
            let s: f64 = fv.row(i).map(|(_, w)| w).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }
}
