//! Transfer of an ellipsoid mesh back onto the source surface through the inverse
//! of a parameterization.

use std::collections::HashMap;

use nalgebra::Matrix3;

use crate::conformal::ParamMap;
use crate::error::{Error, Result};
use crate::mesh::TriMesh;
use crate::{par, Vec3};

/// Largest tolerated negative barycentric coordinate.
pub const LOCATION_TOLERANCE: f64 = 1e-6;

/// Uniform grid over unit-sphere directions, each cell listing the faces whose
/// directional cone may reach it.
pub struct SphereIndex {
    cell: f64,
    cells: HashMap<[i64; 3], Vec<usize>>,
    /// Inverses of `[p0 p1 p2]` per face, mapping a direction to cone coordinates.
    inverse: Vec<Option<Matrix3<f64>>>,
}

impl SphereIndex {
    pub fn new(faces: &[[usize; 3]], positions: &[Vec3]) -> Self {
        let dirs: Vec<Vec3> = positions.iter().map(|p| p.normalize()).collect();
        let longest = faces
            .iter()
            .map(|f| (0..3).map(|k| (dirs[f[k]] - dirs[f[(k + 1) % 3]]).norm()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        let mean_edge = (4.0 * std::f64::consts::PI / faces.len().max(1) as f64).sqrt();
        let cell = (2.0 * mean_edge).max(1e-3);
        let key = |p: &Vec3| p.map(|x| (x / cell).floor() as i64);
        let mut cells: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
        // Spherical triangles bulge off their chords by at most a sagitta of the longest edge.
        let pad = longest * longest / 2.0 + 1e-9;
        for (fi, f) in faces.iter().enumerate() {
            let mut lo = Vec3::repeat(f64::INFINITY);
            let mut hi = Vec3::repeat(f64::NEG_INFINITY);
            for &v in f {
                lo = lo.inf(&dirs[v]);
                hi = hi.sup(&dirs[v]);
            }
            let (a, b) = (key(&lo.add_scalar(-pad)), key(&hi.add_scalar(pad)));
            for x in a.x..=b.x {
                for y in a.y..=b.y {
                    for z in a.z..=b.z {
                        cells.entry([x, y, z]).or_default().push(fi);
                    }
                }
            }
        }
        let inverse = par::map_slice(faces, |f| Matrix3::from_columns(&[positions[f[0]], positions[f[1]], positions[f[2]]]).try_inverse());
        Self { cell, cells, inverse }
    }

    /// Normalized barycentric coordinates of the ray through `q` in face `fi`, with
    /// the residual `max(0, −min λ)`.
    fn test(&self, fi: usize, q: &Vec3) -> Option<([f64; 3], f64)> {
        let l = self.inverse[fi]? * q;
        let s = l.sum();
        if !(s > 0.0) {
            return None;
        }
        let l = l / s;
        Some(([l.x, l.y, l.z], (-l.min()).max(0.0)))
    }

    fn best<I: Iterator<Item = usize>>(&self, faces: I, q: &Vec3) -> Option<(usize, [f64; 3], f64)> {
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for fi in faces {
            if let Some((l, r)) = self.test(fi, q) {
                if best.is_none_or(|b| r < b.2) {
                    best = Some((fi, l, r));
                }
            }
        }
        best
    }

    /// Face hit by the ray from the origin through `q`, with its barycentric
    /// coordinates; the smallest residual wins near edges.
    pub fn locate(&self, q: &Vec3) -> Option<(usize, [f64; 3], f64)> {
        let k = q.normalize().map(|x| (x / self.cell).floor() as i64);
        let hit = self.cells.get(&[k.x, k.y, k.z]).and_then(|c| self.best(c.iter().copied(), q));
        match hit {
            Some(h) if h.2 <= LOCATION_TOLERANCE => Some(h),
            _ => self.best(0..self.inverse.len(), q),
        }
    }
}

/// Maps every vertex of `samples` (lying on the parameterization's ellipsoid) back
/// to the source surface by barycentric interpolation. Connectivity is kept.
pub fn pull_back(param: &ParamMap, samples: &TriMesh) -> Result<TriMesh> {
    let index = SphereIndex::new(param.source.faces(), &param.positions);
    let src = param.source.vertices();
    let faces = param.source.faces();
    let out = par::try_map_range(samples.num_vertices(), |i| {
        let q = samples.vertices()[i];
        match index.locate(&q) {
            Some((fi, l, r)) if r <= LOCATION_TOLERANCE => {
                let f = faces[fi];
                Ok(src[f[0]] * l[0] + src[f[1]] * l[1] + src[f[2]] * l[2])
            }
            Some((_, _, r)) => Err(Error::LocationFailure { sample: i, residual: r }),
            None => Err(Error::LocationFailure { sample: i, residual: f64::INFINITY }),
        }
    })?;
    TriMesh::new(out, samples.faces().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conformal::spherical_conformal_map;
    use crate::{models, EllipsoidRadii};
    use rand::{Rng, SeedableRng};

    #[test]
    fn own_vertices_return_the_source() {
        let m = models::bumpy_ellipsoid(8);
        let map = spherical_conformal_map(&m).unwrap();
        let samples = map.image_mesh();
        let back = pull_back(&map, &samples).unwrap();
        for (a, b) in back.vertices().iter().zip(m.vertices()) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn identity_parameterization_reproduces_samples() {
        let radii = EllipsoidRadii::new(1.0, 1.5, 2.0).unwrap();
        let m = models::ellipsoid(&radii, 24);
        let map = ParamMap { source: m.clone(), positions: m.vertices().to_vec(), radii };
        let samples = crate::remesh::uniform_ellipsoid_mesh(&radii, 500).unwrap();
        let back = pull_back(&map, &samples).unwrap();
        // Off the source vertices the output lies on the flat triangles.
        let h = 2.0 * std::f64::consts::PI * 2.0 / (5.0 * 24.0);
        for (a, b) in back.vertices().iter().zip(samples.vertices()) {
            assert!((a - b).norm() < h * h, "{}", (a - b).norm());
        }
    }

    #[test]
    fn random_samples_all_located() {
        let m = models::peanut(12);
        let map = spherical_conformal_map(&m).unwrap();
        let index = SphereIndex::new(m.faces(), &map.positions);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            let q = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            if q.norm() < 1e-3 {
                continue;
            }
            let (_, _, r) = index.locate(&q.normalize()).unwrap();
            assert!(r <= LOCATION_TOLERANCE);
        }
    }
}
