//! Fold-over detection and correction for maps onto spheres and ellipsoids.
//!
//! The sphere is covered by two stereographic charts: faces whose initial centroid
//! lies in the southern hemisphere, projected from the north pole, and the rest,
//! projected from the south pole. Each chart is widened by a band of face rings.
//! In every chart the Beltrami coefficient of the map from the initial to the
//! current chart image is computed, reset to zero on folded faces, capped where
//! `|μ| ≥ 1` and fed back to the Linear Beltrami Solver with the chart boundary
//! held fixed. The two chart solutions are blended on the band and projected back
//! to the sphere.

use crate::conformal::stereo::{inverse_stereographic, stereographic_all, Pole};
use crate::error::{Error, Result};
use crate::mesh::TriMesh;
use crate::par;
use crate::{Complex, EllipsoidRadii, Vec3};

use super::beltrami::planar_face_beltrami;
use super::lbs::lbs_dirichlet;

pub const MAX_CORRECTION_ROUNDS: usize = 5;
/// Face rings added around each hemisphere chart.
const BAND_RINGS: usize = 2;
/// Modulus given to coefficients of unfolded faces with `|μ| ≥ 1`.
const MU_TRUNCATION: f64 = 0.9;

/// Orientation of a face relative to the origin: `det[p0, p1, p2]`.
fn orientation(f: &[usize; 3], p: &[Vec3]) -> f64 {
    p[f[0]].dot(&p[f[1]].cross(&p[f[2]]))
}

/// Faces whose orientation about the origin differs between `reference` and `test`.
pub fn flipped_faces(faces: &[[usize; 3]], reference: &[Vec3], test: &[Vec3]) -> Vec<bool> {
    par::map_slice(faces, |f| {
        let r = orientation(f, reference);
        let t = orientation(f, test);
        r.signum() * t <= 0.0
    })
}

/// Faces with `det[p0, p1, p2] <= 0`, i.e. not facing away from the origin. For a
/// map onto a sphere or ellipsoid from an outward-oriented mesh this is the number
/// of fold-overs.
pub fn count_inverted_faces(faces: &[[usize; 3]], positions: &[Vec3]) -> usize {
    par::map_slice(faces, |f| orientation(f, positions) <= 0.0).into_iter().filter(|&b| b).count()
}

pub fn count_flipped_faces(reference: &[Vec3], test: &[Vec3], mesh: &TriMesh) -> usize {
    flipped_faces(mesh.faces(), reference, test).into_iter().filter(|&b| b).count()
}

struct Chart {
    pole: Pole,
    /// Global vertex ids, sorted.
    vertices: Vec<usize>,
    /// Faces in local numbering.
    faces: Vec<[usize; 3]>,
    /// Global face ids matching `faces`.
    face_ids: Vec<usize>,
    /// Ring distance to the chart boundary, per local vertex.
    depth: Vec<usize>,
}

impl Chart {
    fn new(mesh: &TriMesh, seed: Vec<bool>, pole: Pole) -> Self {
        let nv = mesh.num_vertices();
        let mut in_chart = seed;
        for _ in 0..BAND_RINGS {
            let mut touched = vec![false; nv];
            for (f, &inside) in mesh.faces().iter().zip(&in_chart) {
                if inside {
                    for &v in f {
                        touched[v] = true;
                    }
                }
            }
            for (fi, f) in mesh.faces().iter().enumerate() {
                if f.iter().any(|&v| touched[v]) {
                    in_chart[fi] = true;
                }
            }
        }
        let mut local = vec![usize::MAX; nv];
        let mut vertices = Vec::new();
        let mut face_ids = Vec::new();
        for (fi, f) in mesh.faces().iter().enumerate() {
            if in_chart[fi] {
                face_ids.push(fi);
                for &v in f {
                    local[v] = 0;
                }
            }
        }
        for (v, slot) in local.iter_mut().enumerate() {
            if *slot == 0 {
                *slot = vertices.len();
                vertices.push(v);
            }
        }
        let faces = face_ids.iter().map(|&fi| mesh.faces()[fi].map(|v| local[v])).collect();

        // Boundary vertices touch a face outside the chart; depth grows inward.
        let mut depth = vec![usize::MAX; vertices.len()];
        let mut frontier: Vec<usize> = Vec::new();
        for (l, &v) in vertices.iter().enumerate() {
            if mesh.vertex_faces().get(v).iter().any(|&f| !in_chart[f]) {
                depth[l] = 0;
                frontier.push(l);
            }
        }
        let mut d = 0;
        while !frontier.is_empty() {
            d += 1;
            let mut next = Vec::new();
            for &l in &frontier {
                for &w in mesh.vertex_neighbors().get(vertices[l]) {
                    let lw = local[w];
                    if lw != usize::MAX && depth[lw] == usize::MAX {
                        depth[lw] = d;
                        next.push(lw);
                    }
                }
            }
            frontier = next;
        }
        // A chart with no boundary (everything inside) is uniformly deep.
        for x in &mut depth {
            if *x == usize::MAX {
                *x = d.max(1);
            }
        }
        Self { pole, vertices, faces, face_ids, depth }
    }

    /// Corrected sphere positions of the chart vertices.
    fn correct(&self, initial: &[Vec3], current: &[Vec3], flipped: &[bool]) -> Result<Vec<Vec3>> {
        let gather = |p: &[Vec3]| self.vertices.iter().map(|&v| p[v]).collect::<Vec<_>>();
        let src = stereographic_all(&gather(initial), self.pole)?;
        let dst = stereographic_all(&gather(current), self.pole)?;
        let mu: Vec<Complex> = par::map_range(self.faces.len(), |t| {
            let f = self.faces[t];
            match planar_face_beltrami(t, f.map(|v| src[v]), f.map(|v| dst[v])) {
                Ok(m) if !flipped[self.face_ids[t]] && m.norm() < 1.0 => m,
                Ok(m) if !flipped[self.face_ids[t]] && m.norm() > 0.0 => m * (MU_TRUNCATION / m.norm()).min(1.0),
                _ => Complex::new(0.0, 0.0),
            }
        });
        let constraints: Vec<(usize, Complex)> =
            (0..self.vertices.len()).filter(|&l| self.depth[l] == 0).map(|l| (l, dst[l])).collect();
        let solved = lbs_dirichlet(&self.faces, &src, &mu, &constraints)?;
        Ok(solved.into_iter().map(|w| inverse_stereographic(w, self.pole)).collect())
    }
}

fn correction_round(mesh: &TriMesh, initial: &[Vec3], current: &[Vec3], flipped: &[bool]) -> Result<Vec<Vec3>> {
    let south_seed: Vec<bool> = mesh
        .faces()
        .iter()
        .map(|f| initial[f[0]].z + initial[f[1]].z + initial[f[2]].z < 0.0)
        .collect();
    let north_seed = south_seed.iter().map(|s| !s).collect();
    let charts = [Chart::new(mesh, south_seed, Pole::North), Chart::new(mesh, north_seed, Pole::South)];

    let nv = mesh.num_vertices();
    let mut acc = vec![Vec3::zeros(); nv];
    let mut weight = vec![0.0; nv];
    let mut covered = vec![false; nv];
    for chart in &charts {
        let solved = chart.correct(initial, current, flipped)?;
        for (l, &v) in chart.vertices.iter().enumerate() {
            let w = chart.depth[l] as f64;
            acc[v] += solved[l] * w;
            weight[v] += w;
            covered[v] = true;
            // Depth-zero vertices in both charts would otherwise get no weight.
            if w == 0.0 && weight[v] == 0.0 {
                acc[v] = solved[l];
            }
        }
    }
    Ok((0..nv)
        .map(|v| {
            debug_assert!(covered[v]);
            let p = if weight[v] > 0.0 { acc[v] / weight[v] } else { acc[v] };
            p.normalize()
        })
        .collect())
}

/// Removes fold-overs of `current` relative to `initial`, both on the unit sphere.
/// A flip-free input is returned unchanged.
pub fn overlap_correction_sphere(mesh: &TriMesh, initial: &[Vec3], current: &[Vec3]) -> Result<Vec<Vec3>> {
    let mut flipped = flipped_faces(mesh.faces(), initial, current);
    let mut flips = flipped.iter().filter(|&&b| b).count();
    if flips == 0 {
        return Ok(current.to_vec());
    }
    let mut positions = current.to_vec();
    for round in 0..MAX_CORRECTION_ROUNDS {
        positions = correction_round(mesh, initial, &positions, &flipped)?;
        flipped = flipped_faces(mesh.faces(), initial, &positions);
        let remaining = flipped.iter().filter(|&&b| b).count();
        log::debug!("overlap correction round {}: {flips} -> {remaining} flipped faces", round + 1);
        flips = remaining;
        if flips == 0 {
            return Ok(positions);
        }
    }
    Err(Error::CorrectionFailed { flips })
}

/// Ellipsoidal correction `h⁻¹ ∘ g ∘ h`, with `h` the axis rescaling to the sphere.
pub fn overlap_correction_ellipsoid(
    mesh: &TriMesh,
    initial: &[Vec3],
    current: &[Vec3],
    radii: &EllipsoidRadii,
) -> Result<Vec<Vec3>> {
    if count_flipped_faces(initial, current, mesh) == 0 {
        return Ok(current.to_vec());
    }
    let to_sphere = |p: &[Vec3]| p.iter().map(|q| radii.to_sphere(q).normalize()).collect::<Vec<_>>();
    let corrected = overlap_correction_sphere(mesh, &to_sphere(initial), &to_sphere(current))?;
    Ok(corrected.iter().map(|q| radii.from_sphere(q)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;

    /// Reflects vertex `v` through the plane of its 1-ring (least-squares fit by
    /// the ring centroid and the radial direction).
    fn reflect_through_ring(mesh: &TriMesh, p: &[Vec3], v: usize) -> Vec<Vec3> {
        let ring = mesh.vertex_neighbors().get(v);
        let c = ring.iter().map(|&w| p[w]).sum::<Vec3>() / ring.len() as f64;
        let n = c.normalize();
        let mut out = p.to_vec();
        out[v] = p[v] - n * (2.0 * n.dot(&(p[v] - c)));
        out
    }

    #[test]
    fn identical_maps_have_no_flips() {
        let m = models::geodesic_sphere(5);
        assert_eq!(count_flipped_faces(m.vertices(), m.vertices(), &m), 0);
    }

    #[test]
    fn reflected_apex_flips_its_star() {
        // Hexagonal bipyramid; the upper apex reflected through the ring plane.
        let mut v = vec![Vec3::new(0.0, 0.0, 0.5)];
        for k in 0..6 {
            let t = k as f64 * std::f64::consts::PI / 3.0;
            v.push(Vec3::new(t.cos(), t.sin(), 0.0));
        }
        v.push(Vec3::new(0.0, 0.0, -0.7));
        let mut f = Vec::new();
        for k in 0..6 {
            f.push([0, 1 + k, 1 + (k + 1) % 6]);
            f.push([7, 1 + (k + 1) % 6, 1 + k]);
        }
        let m = TriMesh::new(v, f).unwrap();
        let mut bad = m.vertices().to_vec();
        bad[0].z = -0.5;
        assert_eq!(count_flipped_faces(m.vertices(), &bad, &m), 6);
    }

    #[test]
    fn flip_free_input_is_returned_unchanged() {
        let m = models::geodesic_sphere(6);
        let warped: Vec<Vec3> = m.vertices().iter().map(|p| (p + Vec3::new(0.2 * p.y, 0.0, 0.1)).normalize()).collect();
        assert_eq!(overlap_correction_sphere(&m, m.vertices(), &warped).unwrap(), warped);
    }

    #[test]
    fn sphere_correction_removes_manufactured_flips() {
        let m = models::geodesic_sphere(10);
        for v in [5, 123, 700] {
            let mut bad = reflect_through_ring(&m, m.vertices(), v);
            // Push the reflected vertex back onto the sphere on the far side of its ring.
            let ring = m.vertex_neighbors().get(v);
            let c = ring.iter().map(|&w| m.vertices()[w]).sum::<Vec3>() / ring.len() as f64;
            let shift = (m.vertices()[ring[0]] - c) * 1.6;
            bad[v] = (c + shift).normalize();
            assert!(count_flipped_faces(m.vertices(), &bad, &m) > 0);
            let fixed = overlap_correction_sphere(&m, m.vertices(), &bad).unwrap();
            assert_eq!(count_flipped_faces(m.vertices(), &fixed, &m), 0);
            assert!(fixed.iter().all(|p| (p.norm() - 1.0).abs() < 1e-9));
        }
    }

    #[test]
    fn ellipsoid_correction_removes_manufactured_flips() {
        let r = EllipsoidRadii::new(1.0, 2.0, 4.0).unwrap();
        let m = models::ellipsoid(&r, 10);
        let v = 300;
        let ring = m.vertex_neighbors().get(v);
        let c = ring.iter().map(|&w| m.vertices()[w]).sum::<Vec3>() / ring.len() as f64;
        let mut bad = m.vertices().to_vec();
        bad[v] = r.project(&(c + (m.vertices()[ring[0]] - c) * 1.6)).unwrap();
        assert!(count_flipped_faces(m.vertices(), &bad, &m) > 0);
        let fixed = overlap_correction_ellipsoid(&m, m.vertices(), &bad, &r).unwrap();
        assert_eq!(count_flipped_faces(m.vertices(), &fixed, &m), 0);
        assert!(fixed.iter().all(|p| (r.level(p) - 1.0).abs() < 1e-9));
        let again = overlap_correction_ellipsoid(&m, m.vertices(), &fixed, &r).unwrap();
        assert_eq!(again, fixed);
    }

    #[test]
    fn unit_radii_match_sphere_correction() {
        let m = models::geodesic_sphere(8);
        let v = 50;
        let ring = m.vertex_neighbors().get(v);
        let c = ring.iter().map(|&w| m.vertices()[w]).sum::<Vec3>() / ring.len() as f64;
        let mut bad = m.vertices().to_vec();
        bad[v] = (c + (m.vertices()[ring[0]] - c) * 1.6).normalize();
        let a = overlap_correction_sphere(&m, m.vertices(), &bad).unwrap();
        let b = overlap_correction_ellipsoid(&m, m.vertices(), &bad, &EllipsoidRadii::unit()).unwrap();
        for (p, q) in a.iter().zip(&b) {
            assert!((p - q).norm() < 1e-12);
        }
    }
}
