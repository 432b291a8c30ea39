use serde::{Deserialize, Serialize};

use crate::mesh::TriMesh;

/// `Σ_j |e_j / (e_1 + e_2 + e_3) − 1/3|`; zero exactly for equilateral triangles.
pub fn face_regularity(lengths: [f64; 3]) -> f64 {
    let p: f64 = lengths.iter().sum();
    lengths.iter().map(|e| (e / p - 1.0 / 3.0).abs()).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemeshReport {
    /// `log(A_max / A_min)`.
    pub delta_size: f64,
    /// Mean face regularity.
    pub delta_shape: f64,
    pub vertex_count: usize,
    #[serde(skip)]
    pub regularity: Vec<f64>,
}

pub fn remesh_quality(mesh: &TriMesh) -> RemeshReport {
    let areas = mesh.face_areas();
    let (lo, hi) = areas.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &a| (lo.min(a), hi.max(a)));
    let v = mesh.vertices();
    let regularity: Vec<f64> = mesh
        .faces()
        .iter()
        .map(|f| face_regularity([(v[f[1]] - v[f[0]]).norm(), (v[f[2]] - v[f[1]]).norm(), (v[f[0]] - v[f[2]]).norm()]))
        .collect();
    RemeshReport {
        delta_size: (hi / lo).ln(),
        delta_shape: regularity.iter().sum::<f64>() / regularity.len() as f64,
        vertex_count: mesh.num_vertices(),
        regularity,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;

    #[test]
    fn regularity_examples() {
        assert_eq!(face_regularity([1.0, 1.0, 1.0]), 0.0);
        assert!((face_regularity([2.0, 1.0, 1.0]) - 1.0 / 3.0).abs() < 1e-15);
        assert!((face_regularity([3.0, 4.0, 5.0]) - face_regularity([0.3, 0.4, 0.5])).abs() < 1e-15);
    }

    #[test]
    fn icosphere_baseline() {
        let r = remesh_quality(&models::icosphere(4));
        assert!(r.delta_size < 0.6 && r.delta_shape < 0.08, "{r:?}");
    }

    #[test]
    fn equilateral_mesh_has_zero_shape_variation() {
        let r = remesh_quality(&models::icosahedron());
        assert!(r.delta_shape < 1e-15 && r.delta_size < 1e-12);
        let t = remesh_quality(&models::regular_tetrahedron());
        assert!(t.delta_shape < 1e-15);
    }

    #[test]
    fn doubled_face_bounds_size_variation() {
        // Moving a tetrahedron apex outward doubles nothing exactly, so build the
        // bound directly: scaling one face's apex height scales its area.
        let t = models::regular_tetrahedron();
        let mut v = t.vertices().to_vec();
        let c = (v[1] + v[2] + v[3]) / 3.0;
        v[0] = c + (v[0] - c) * 3.0;
        let m = t.with_vertices(v).unwrap();
        let areas = m.face_areas();
        let ratio = areas.iter().cloned().fold(0.0, f64::max) / areas.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(ratio >= 2.0);
        assert!(remesh_quality(&m).delta_size >= 2f64.ln());
    }
}
