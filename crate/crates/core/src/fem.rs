//! Piecewise-linear finite-element operators on a triangle mesh.

use crate::error::{Error, Result};
use crate::mesh::{face_areas, face_cross, FaceToVertexMatrix, TriMesh};
use crate::par;
use crate::sparse::{SparseSymMatrix, SpdSolver};
use crate::Vec3;

/// Cotangent Laplacian: `L_ij = -(cot α_ij + cot β_ij)/2` off the diagonal and
/// `L_ii = -Σ_j L_ij`, so that `L` is positive semidefinite on Delaunay meshes.
pub fn cotangent_laplacian(mesh: &TriMesh, positions: &[Vec3]) -> Result<SparseSymMatrix> {
    let per_face = par::try_map_range(mesh.num_faces(), |fi| {
        let f = mesh.faces()[fi];
        let twice_area = face_cross(&f, positions).norm();
        if !(twice_area > 0.0) {
            return Err(Error::DegenerateFace { face: fi, area: 0.5 * twice_area });
        }
        let mut t = [(0, 0, 0.0); 12];
        for k in 0..3 {
            let (o, i, j) = (f[k], f[(k + 1) % 3], f[(k + 2) % 3]);
            let cot = (positions[i] - positions[o]).dot(&(positions[j] - positions[o])) / twice_area;
            let w = 0.5 * cot;
            t[4 * k] = (i, j, -w);
            t[4 * k + 1] = (j, i, -w);
            t[4 * k + 2] = (i, i, w);
            t[4 * k + 3] = (j, j, w);
        }
        Ok(t)
    })?;
    Ok(SparseSymMatrix::from_triplets(mesh.num_vertices(), per_face.into_iter().flatten().collect()))
}

/// Diagonal vertex areas `A_ii = (1/3) Σ_{T ∋ i} Area(T)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LumpedMass(pub Vec<f64>);

impl LumpedMass {
    pub fn total(&self) -> f64 {
        par::sum(self.0.len(), |i| self.0[i])
    }
}

pub fn lumped_mass(mesh: &TriMesh, positions: &[Vec3]) -> LumpedMass {
    let areas = face_areas(mesh.faces(), positions);
    let vf = mesh.vertex_faces();
    LumpedMass(par::map_range(mesh.num_vertices(), |v| vf.get(v).iter().map(|&f| areas[f]).sum::<f64>() / 3.0))
}

/// Per-face population together with the face and vertex densities it induces on
/// the current geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    pub population: Vec<f64>,
    pub rho_face: Vec<f64>,
    pub rho_vertex: Vec<f64>,
}

impl DensityField {
    /// `ρ_F = population / area`, `ρ_V = M ρ_F`.
    pub fn new(mesh: &TriMesh, positions: &[Vec3], population: Vec<f64>) -> Result<Self> {
        if population.len() != mesh.num_faces() {
            return Err(Error::InvalidInput(format!(
                "population has {} entries but the mesh has {} faces",
                population.len(),
                mesh.num_faces()
            )));
        }
        if let Some((i, &p)) = population.iter().enumerate().find(|(_, p)| !(**p > 0.0) || !p.is_finite()) {
            return Err(Error::NonpositiveDensity { index: i, value: p });
        }
        let areas = face_areas(mesh.faces(), positions);
        let rho_face: Vec<f64> = population.iter().zip(&areas).map(|(p, a)| p / a).collect();
        let m = FaceToVertexMatrix::from_areas(mesh, &areas)?;
        let rho_vertex = m.apply(&rho_face);
        Ok(Self { population, rho_face, rho_vertex })
    }

    /// Re-couples the densities to new positions, keeping the population.
    pub fn recouple(&self, mesh: &TriMesh, positions: &[Vec3]) -> Result<Self> {
        Self::new(mesh, positions, self.population.clone())
    }
}

/// One backward-Euler step `(A + dt L) ρ' = A ρ`.
///
/// Nonpositive results, which obtuse meshes can produce, are clamped to
/// `1e-8 · mean(ρ')` with a warning.
pub fn diffusion_step(rho_vertex: &[f64], l: &SparseSymMatrix, a: &LumpedMass, dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0) {
        return Err(Error::InvalidInput(format!("time step must be positive, got {dt}")));
    }
    let system = l.scaled_plus_diagonal(dt, &a.0);
    let rhs: Vec<f64> = rho_vertex.iter().zip(&a.0).map(|(r, m)| r * m).collect();
    let mut rho = SpdSolver::new(&system).solve(&rhs)?;
    let mean = rho.iter().sum::<f64>() / rho.len() as f64;
    let floor = 1e-8 * mean;
    let clamped = rho.iter_mut().filter(|r| **r <= 0.0).map(|r| *r = floor).count();
    if clamped > 0 {
        log::warn!("clamped {clamped} nonpositive vertex densities after diffusion");
    }
    Ok(rho)
}

/// Gradient of the piecewise-linear interpolant of `rho_vertex`, one vector per
/// face, lying in the face plane.
pub fn density_gradient(mesh: &TriMesh, positions: &[Vec3], rho_vertex: &[f64]) -> Result<Vec<Vec3>> {
    par::try_map_range(mesh.num_faces(), |fi| {
        let [i, j, k] = mesh.faces()[fi];
        let (pi, pj, pk) = (positions[i], positions[j], positions[k]);
        let cross = (pj - pi).cross(&(pk - pi));
        let twice_area = cross.norm();
        if !(twice_area > 0.0) {
            return Err(Error::DegenerateFace { face: fi, area: 0.5 * twice_area });
        }
        let n = cross / twice_area;
        let s = (pk - pj) * rho_vertex[i] + (pi - pk) * rho_vertex[j] + (pj - pi) * rho_vertex[k];
        Ok(n.cross(&s) / twice_area)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;
    use nalgebra::{Rotation3, Unit};

    #[test]
    fn tetrahedron_laplacian() {
        let t = models::regular_tetrahedron();
        let l = cotangent_laplacian(&t, t.vertices()).unwrap();
        let w = -1.0 / 3f64.sqrt();
        for e in t.edges() {
            assert!((l.get(e[0], e[1]) - w).abs() < 1e-12);
        }
        for d in l.diagonal() {
            assert!((d - 3.0 / 3f64.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn laplacian_annihilates_constants() {
        let m = models::bumpy_ellipsoid(8);
        let l = cotangent_laplacian(&m, m.vertices()).unwrap();
        let y = l.mul_vec(&vec![1.0; m.num_vertices()]);
        assert!(y.iter().all(|v| v.abs() < 1e-10));
        assert!(l.asymmetry() <= 1e-12 * l.max_abs());
    }

    #[test]
    fn laplacian_is_rotation_invariant() {
        let m = models::peanut(5);
        let rot = Rotation3::from_axis_angle(&Unit::new_normalize(Vec3::new(1.0, 2.0, -0.5)), 0.7);
        let moved: Vec<Vec3> = m.vertices().iter().map(|p| rot * p).collect();
        let a = cotangent_laplacian(&m, m.vertices()).unwrap();
        let b = cotangent_laplacian(&m, &moved).unwrap();
        for i in 0..m.num_vertices() {
            for (j, v) in a.row(i) {
                assert!((v - b.get(i, j)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn tetrahedron_lumped_mass() {
        let t = models::regular_tetrahedron();
        let a = lumped_mass(&t, t.vertices());
        assert!(a.0.iter().all(|&m| (m - 3f64.sqrt() / 4.0).abs() < 1e-15));
    }

    #[test]
    fn lumped_mass_totals_and_scales() {
        let m = models::banana(6);
        let a = lumped_mass(&m, m.vertices());
        assert!((a.total() - m.surface_area()).abs() < 1e-10 * m.surface_area());
        let scaled: Vec<Vec3> = m.vertices().iter().map(|p| p * 3.0).collect();
        let b = lumped_mass(&m, &scaled);
        for (x, y) in a.0.iter().zip(&b.0) {
            assert!((y - 9.0 * x).abs() < 1e-13 * y);
        }
    }

    #[test]
    fn diffusion_keeps_constants() {
        let m = models::geodesic_sphere(4);
        let l = cotangent_laplacian(&m, m.vertices()).unwrap();
        let a = lumped_mass(&m, m.vertices());
        let rho = diffusion_step(&vec![2.5; m.num_vertices()], &l, &a, 0.1).unwrap();
        assert!(rho.iter().all(|r| (r - 2.5).abs() < 1e-12));
    }

    #[test]
    fn diffusion_conserves_mass() {
        let m = models::bumpy_ellipsoid(6);
        let l = cotangent_laplacian(&m, m.vertices()).unwrap();
        let a = lumped_mass(&m, m.vertices());
        let rho: Vec<f64> = m.vertices().iter().map(|p| 1.0 + 0.8 * (3.0 * p.x).sin().abs()).collect();
        let before: f64 = rho.iter().zip(&a.0).map(|(r, m)| r * m).sum();
        let out = diffusion_step(&rho, &l, &a, 0.1).unwrap();
        let after: f64 = out.iter().zip(&a.0).map(|(r, m)| r * m).sum();
        assert!((after - before).abs() < 1e-8 * before);
    }

    #[test]
    fn diffusion_matches_dense_solve_on_tetrahedron() {
        let t = models::regular_tetrahedron();
        let l = cotangent_laplacian(&t, t.vertices()).unwrap();
        let a = lumped_mass(&t, t.vertices());
        let rho = [1.0, 1.0, 3.0, 3.0];
        let out = diffusion_step(&rho, &l, &a, 0.1).unwrap();
        let mut d = nalgebra::DMatrix::<f64>::zeros(4, 4);
        for i in 0..4 {
            for j in 0..4 {
                d[(i, j)] = 0.1 * l.get(i, j);
            }
            d[(i, i)] += a.0[i];
        }
        let rhs = nalgebra::DVector::from_fn(4, |i, _| a.0[i] * rho[i]);
        let oracle = d.lu().solve(&rhs).unwrap();
        for i in 0..4 {
            assert!((out[i] - oracle[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn diffusion_reduces_variance() {
        let m = models::geodesic_sphere(8);
        let l = cotangent_laplacian(&m, m.vertices()).unwrap();
        let a = lumped_mass(&m, m.vertices());
        let var = |v: &[f64]| {
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64
        };
        for eps in [0.1, 0.5] {
            let rho: Vec<f64> = m.vertices().iter().map(|p| 1.0 + eps * p.z).collect();
            let out = diffusion_step(&rho, &l, &a, 0.1).unwrap();
            assert!(var(&out) < var(&rho));
            assert!(out.iter().all(|&r| r > 0.0));
        }
    }

    #[test]
    fn gradient_of_constant_is_zero() {
        let m = models::peanut(4);
        let g = density_gradient(&m, m.vertices(), &vec![3.0; m.num_vertices()]).unwrap();
        assert!(g.iter().all(|v| v.norm() < 1e-12));
    }

    #[test]
    fn gradient_reproduces_linear_field() {
        let p = vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.3, 0.2, 0.0), Vec3::new(0.4, 0.9, 0.0), Vec3::new(0.5, 0.4, -1.0)];
        let faces = vec![[0, 1, 2], [0, 3, 1], [1, 3, 2], [0, 2, 3]];
        let m = TriMesh::new(p.clone(), faces).unwrap();
        let rho: Vec<f64> = m.vertices().iter().map(|q| q.x).collect();
        let g = density_gradient(&m, m.vertices(), &rho).unwrap();
        let planar = m.faces().iter().position(|f| f.iter().all(|&v| v < 3)).unwrap();
        assert!((g[planar] - Vec3::x()).norm() < 1e-12);
    }

    #[test]
    fn gradient_lies_in_face_plane() {
        let m = models::twisted_bar(6);
        let rho: Vec<f64> = m.vertices().iter().map(|p| 2.0 + (p.x * 3.0).cos() * p.y).collect();
        let g = density_gradient(&m, m.vertices(), &rho).unwrap();
        for (f, v) in m.faces().iter().zip(&g) {
            let n = face_cross(f, m.vertices()).normalize();
            assert!(n.dot(v).abs() <= 1e-10 * v.norm().max(1e-300));
        }
    }

    #[test]
    fn density_field_couples_population_and_area() {
        let m = models::bumpy_ellipsoid(4);
        let pop: Vec<f64> = (0..m.num_faces()).map(|i| 1.0 + (i % 3) as f64).collect();
        let d = DensityField::new(&m, m.vertices(), pop.clone()).unwrap();
        for ((r, a), p) in d.rho_face.iter().zip(m.face_areas()).zip(&pop) {
            assert!((r * a - p).abs() <= 1e-15 * p);
        }
        let mut bad = pop;
        bad[5] = 0.0;
        assert!(matches!(DensityField::new(&m, m.vertices(), bad), Err(Error::NonpositiveDensity { index: 5, .. })));
    }
}
