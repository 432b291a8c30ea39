//! Near-uniform triangle meshes of an ellipsoid with a prescribed vertex count.
//!
//! A scaled icosphere is refined by longest-edge splits to the exact count, its
//! face areas are equalized by the density-equalizing flow, and a final round of
//! edge flips and tangential smoothing restores the triangle shapes.

use std::collections::HashMap;

use crate::edem::{step_with_retry, EdemState};
use crate::error::{Error, Result};
use crate::fem::DensityField;
use crate::mesh::TriMesh;
use crate::models::icosphere;
use nalgebra::Matrix3;

use crate::{par, EllipsoidRadii, Vec3};

/// Smoothing iterations after the vertex count is reached.
pub const SMOOTHING_ITERATIONS: usize = 30;

/// The icosahedron.
pub const MIN_TARGET_VERTICES: usize = 12;

/// Largest icosphere level whose vertex count `10·4^k + 2` does not exceed `target`.
pub fn icosphere_level(target: usize) -> u32 {
    let mut k = 0;
    while 10 * 4usize.pow(k + 1) + 2 <= target {
        k += 1;
    }
    k
}

type EdgeMap = HashMap<(usize, usize), [usize; 2]>;

/// Edge → the two faces sharing it; the first face traverses it as `(lo, hi)`.
fn edge_faces(faces: &[[usize; 3]]) -> EdgeMap {
    let mut map: EdgeMap = HashMap::with_capacity(faces.len() * 3 / 2);
    for (fi, f) in faces.iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            let e = map.entry((a.min(b), a.max(b))).or_insert([usize::MAX; 2]);
            if a < b {
                e[0] = fi;
            } else {
                e[1] = fi;
            }
        }
    }
    map
}

fn opposite(f: &[usize; 3], a: usize, b: usize) -> usize {
    f.iter().copied().find(|&v| v != a && v != b).expect("triangle has three vertices")
}

/// Splits the longest edges until the mesh has exactly `target` vertices.
fn split_to_count(p: &mut Vec<Vec3>, faces: &mut Vec<[usize; 3]>, radii: &EllipsoidRadii, target: usize) {
    while p.len() < target {
        let map = edge_faces(faces);
        let mut edges: Vec<((usize, usize), f64)> = map.keys().map(|&(a, b)| ((a, b), (p[a] - p[b]).norm_squared())).collect();
        edges.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
        let mut touched = vec![false; faces.len()];
        for ((a, b), _) in edges {
            if p.len() == target {
                break;
            }
            let [f1, f2] = map[&(a, b)];
            if touched[f1] || touched[f2] {
                continue;
            }
            touched[f1] = true;
            touched[f2] = true;
            let m = p.len();
            p.push(radii.project(&((p[a] + p[b]) * 0.5)).expect("midpoint of a chord is not the centre"));
            // f1 runs a → b, f2 runs b → a.
            let c = opposite(&faces[f1], a, b);
            let d = opposite(&faces[f2], a, b);
            faces[f1] = [a, m, c];
            faces.push([m, b, c]);
            faces[f2] = [b, m, d];
            faces.push([m, a, d]);
        }
    }
}

fn angle_at(p: &[Vec3], apex: usize, u: usize, v: usize) -> f64 {
    (p[u] - p[apex]).angle(&(p[v] - p[apex]))
}

fn orientation(p: &[Vec3], f: &[usize; 3]) -> f64 {
    p[f[0]].dot(&p[f[1]].cross(&p[f[2]]))
}

/// One sweep of edge flips towards valence 6, breaking ties by the Delaunay
/// condition and refusing flips that halve the smallest angle. Returns the number
/// of flips.
fn flip_pass(p: &[Vec3], faces: &mut [[usize; 3]], valence: &mut [usize]) -> usize {
    let map = edge_faces(faces);
    let mut keys: Vec<(usize, usize)> = map.keys().copied().collect();
    keys.sort_unstable();
    let mut touched = vec![false; faces.len()];
    let mut flips = 0;
    for (a, b) in keys {
        let [f1, f2] = map[&(a, b)];
        if touched[f1] || touched[f2] {
            continue;
        }
        let c = opposite(&faces[f1], a, b);
        let d = opposite(&faces[f2], a, b);
        if c == d || valence[a] <= 3 || valence[b] <= 3 || map.contains_key(&(c.min(d), c.max(d))) {
            continue;
        }
        let dev = |x: usize| (x as i64 - 6).pow(2);
        let before = dev(valence[a]) + dev(valence[b]) + dev(valence[c]) + dev(valence[d]);
        let after = dev(valence[a] - 1) + dev(valence[b] - 1) + dev(valence[c] + 1) + dev(valence[d] + 1);
        let delaunay = angle_at(p, c, a, b) + angle_at(p, d, a, b) > std::f64::consts::PI + 1e-12;
        let min_angle = |t: [usize; 3]| (0..3).map(|k| angle_at(p, t[k], t[(k + 1) % 3], t[(k + 2) % 3])).fold(f64::INFINITY, f64::min);
        let old = min_angle([a, b, c]).min(min_angle([b, a, d]));
        let new = min_angle([c, a, d]).min(min_angle([d, b, c]));
        let keeps_shape = new >= 0.5 * old;
        if after > before || (after == before && !delaunay) || !keeps_shape {
            continue;
        }
        // f1 = (a, b, c) cyclically, f2 = (b, a, d).
        let g1 = [c, a, d];
        let g2 = [d, b, c];
        if orientation(p, &g1) <= 0.0 || orientation(p, &g2) <= 0.0 {
            continue;
        }
        faces[f1] = g1;
        faces[f2] = g2;
        touched[f1] = true;
        touched[f2] = true;
        valence[a] -= 1;
        valence[b] -= 1;
        valence[c] += 1;
        valence[d] += 1;
        flips += 1;
    }
    flips
}

/// Moves each vertex within its tangent plane by a damped Gauss-Newton step
/// towards equal incident face areas, plus a small pull towards the neighbour
/// centroid, then back onto the ellipsoid.
fn smooth(p: &[Vec3], faces: &[[usize; 3]], star: &[Vec<usize>], radii: &EllipsoidRadii) -> Vec<Vec3> {
    let areas = crate::mesh::face_areas(faces, p);
    let target = areas.iter().sum::<f64>() / areas.len() as f64;
    par::map_range(p.len(), |i| {
        let n = radii.normal(&p[i]).unwrap_or_else(Vec3::zeros);
        let mut gram = Matrix3::zeros();
        let mut r = Vec3::zeros();
        let mut centroid = Vec3::zeros();
        let mut shortest = f64::INFINITY;
        for &fi in &star[i] {
            let f = faces[fi];
            let k = f.iter().position(|&v| v == i).expect("vertex in its star");
            let (j, l) = (f[(k + 1) % 3], f[(k + 2) % 3]);
            let cross = (p[j] - p[i]).cross(&(p[l] - p[i]));
            let nf = cross.normalize();
            // ∂A/∂p_i: half the opposite edge turned inward in the face plane.
            let g = nf.cross(&(p[l] - p[j])) * 0.5;
            let g = g - n * g.dot(&n);
            gram += g * g.transpose();
            r += g * (areas[fi] - target);
            centroid += p[j] + p[l];
            shortest = shortest.min((p[j] - p[i]).norm());
        }
        let centroid = centroid / (2 * star[i].len()) as f64;
        gram += Matrix3::identity() * (1e-3 * gram.trace() + 1e-300);
        let step = gram.try_inverse().map_or(Vec3::zeros(), |inv| -(inv * r));
        let pull = centroid - p[i];
        let mut d = step * 0.5 + pull * 0.1;
        d -= n * d.dot(&n);
        if d.norm() > 0.2 * shortest {
            d *= 0.2 * shortest / d.norm();
        }
        radii.project(&(p[i] + d)).unwrap_or(p[i])
    })
}

fn stars(n: usize, faces: &[[usize; 3]]) -> Vec<Vec<usize>> {
    let mut star = vec![Vec::new(); n];
    for (fi, f) in faces.iter().enumerate() {
        for &v in f {
            star[v].push(fi);
        }
    }
    star
}

/// Density-equalizing iterations with one unit of population per face.
pub const EQUALIZE_ITERATIONS: usize = 100;

/// Runs the density-equalizing flow with uniform population so that all faces
/// approach the same area. Stops early on convergence or if a step fails, keeping
/// the last good positions.
fn equalize_areas(mesh: &TriMesh, radii: &EllipsoidRadii) -> Vec<Vec3> {
    let p = mesh.vertices().to_vec();
    let Ok(density) = DensityField::new(mesh, &p, vec![1.0; mesh.num_faces()]) else {
        return p;
    };
    let mut state = EdemState { positions: p.clone(), density };
    for _ in 0..EQUALIZE_ITERATIONS {
        match step_with_retry(mesh, &state, &p, radii, 0.1) {
            Ok((next, record)) => {
                state = next;
                if record.sd_over_mean < 1e-3 {
                    break;
                }
            }
            Err(e) => {
                log::debug!("area equalization stopped early: {e}");
                break;
            }
        }
    }
    state.positions
}

/// Icosphere scaled onto the ellipsoid, without any equalization.
pub fn scaled_icosphere(radii: &EllipsoidRadii, level: u32) -> Result<TriMesh> {
    let s = icosphere(level);
    TriMesh::new(s.vertices().iter().map(|q| radii.from_sphere(q)).collect(), s.faces().to_vec())
}

/// A closed mesh of `E_{a,b,c}` with exactly `target` vertices and near-uniform faces.
pub fn uniform_ellipsoid_mesh(radii: &EllipsoidRadii, target: usize) -> Result<TriMesh> {
    if target < MIN_TARGET_VERTICES {
        return Err(Error::TargetTooSmall(target));
    }
    let base = scaled_icosphere(radii, icosphere_level(target))?;
    let mut p = base.vertices().to_vec();
    let mut faces = base.faces().to_vec();
    split_to_count(&mut p, &mut faces, radii, target);
    p = equalize_areas(&TriMesh::new(p, faces.clone())?, radii);

    let mut valence = vec![0usize; p.len()];
    for f in &faces {
        for &v in f {
            valence[v] += 1;
        }
    }
    for _ in 0..SMOOTHING_ITERATIONS {
        while flip_pass(&p, &mut faces, &mut valence) > 0 {}
        let trial = smooth(&p, &faces, &stars(p.len(), &faces), radii);
        if faces.iter().all(|f| orientation(&trial, f) > 0.0) {
            p = trial;
        }
    }
    while flip_pass(&p, &mut faces, &mut valence) > 0 {}
    TriMesh::new(p, faces)
}
