use crate::error::{Error, Result};
use crate::fem::{cotangent_laplacian, lumped_mass};
use crate::mesh::TriMesh;
use crate::metrics::mean_abs_mu;
use crate::qc::count_inverted_faces;
use crate::remesh::face_regularity;
use crate::sparse::{SparseSymMatrix, SpdSolver};
use crate::{Complex, EllipsoidRadii, Vec3};

use super::mobius::balance_on_sphere;
use super::stereo::{inverse_stereographic, stereographic, Pole};
use super::ParamMap;

/// Solves `L x = 0` on the free vertices with `fixed` as Dirichlet data.
pub(crate) fn solve_dirichlet(l: &SparseSymMatrix, fixed: &[(usize, Complex)]) -> Result<Vec<Complex>> {
    let n = l.dim();
    let mut value: Vec<Option<Complex>> = vec![None; n];
    for &(v, z) in fixed {
        value[v] = Some(z);
    }
    let mut slot = vec![usize::MAX; n];
    let mut free = 0;
    for v in 0..n {
        if value[v].is_none() {
            slot[v] = free;
            free += 1;
        }
    }
    let mut t = Vec::with_capacity(l.nnz());
    let mut rhs = vec![Complex::new(0.0, 0.0); free];
    for i in 0..n {
        if value[i].is_some() {
            continue;
        }
        for (j, w) in l.row(i) {
            match value[j] {
                Some(z) => rhs[slot[i]] -= z * w,
                None => t.push((slot[i], slot[j], w)),
            }
        }
    }
    let system = SparseSymMatrix::from_triplets(free, t);
    let solver = SpdSolver::new(&system);
    let re = solver.solve(&rhs.iter().map(|z| z.re).collect::<Vec<_>>())?;
    let im = solver.solve(&rhs.iter().map(|z| z.im).collect::<Vec<_>>())?;
    Ok((0..n).map(|v| value[v].unwrap_or_else(|| Complex::new(re[slot[v]], im[slot[v]]))).collect())
}

/// Graph Laplacian with unit edge weights.
fn uniform_laplacian(mesh: &TriMesh) -> SparseSymMatrix {
    let mut t = Vec::with_capacity(4 * mesh.num_edges());
    for e in mesh.edges() {
        t.extend([(e[0], e[1], -1.0), (e[1], e[0], -1.0), (e[0], e[0], 1.0), (e[1], e[1], 1.0)]);
    }
    SparseSymMatrix::from_triplets(mesh.num_vertices(), t)
}

fn signed_area(z: [Complex; 3]) -> f64 {
    0.5 * ((z[1] - z[0]).conj() * (z[2] - z[0])).im
}

/// Harmonic map of the mesh minus face `big` onto the plane, with `big` sent to an
/// equilateral triangle. Falls back to uniform weights if the cotangent solution
/// folds.
fn planar_embedding(mesh: &TriMesh, l: &SparseSymMatrix, big: usize) -> Result<Vec<Complex>> {
    let [a, b, c] = mesh.faces()[big];
    // The remaining disk is traversed a → c → b along its boundary.
    let w = Complex::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0);
    let fixed = [(a, Complex::new(1.0, 0.0)), (c, w), (b, w * w)];
    let valid = |z: &[Complex]| {
        mesh.faces().iter().enumerate().all(|(i, f)| i == big || signed_area(f.map(|v| z[v])) > 0.0)
    };
    let z = solve_dirichlet(l, &fixed)?;
    if valid(&z) {
        return Ok(z);
    }
    log::warn!("cotangent embedding folds; falling back to uniform weights");
    let z = solve_dirichlet(&uniform_laplacian(mesh), &fixed)?;
    if valid(&z) {
        Ok(z)
    } else {
        Err(Error::Convergence("planar embedding is not injective".into()))
    }
}

fn most_regular_face(mesh: &TriMesh) -> usize {
    let v = mesh.vertices();
    let reg = |f: &[usize; 3]| {
        face_regularity([(v[f[1]] - v[f[0]]).norm(), (v[f[2]] - v[f[1]]).norm(), (v[f[0]] - v[f[2]]).norm()])
    };
    let mut best = 0;
    let mut best_r = f64::INFINITY;
    for (i, f) in mesh.faces().iter().enumerate() {
        let r = reg(f);
        if r < best_r {
            best_r = r;
            best = i;
        }
    }
    best
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

/// Projected lazy Jacobi sweeps `p_i ← normalize(w_ii p_i + Σ_j w_ij p_j)` with cotangent weights,
/// rebalanced after every sweep.
fn harmonic_polish(l: &SparseSymMatrix, start: &[Vec3], weights: &[f64], sweeps: usize) -> Vec<Vec3> {
    let mut p = start.to_vec();
    for _ in 0..sweeps {
        let next: Vec<Vec3> = crate::par::map_range(p.len(), |i| {
            // Lazy update: the vertex keeps its own weight, which damps oscillation.
            let s = l.row(i).fold(Vec3::zeros(), |acc, (j, w)| if j == i { acc + p[i] * w } else { acc - p[j] * w });
            if s.norm() > 0.0 {
                s.normalize()
            } else {
                p[i]
            }
        });
        let change = next.iter().zip(&p).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        p = next;
        balance_on_sphere(&mut p, weights);
        if change < 1e-13 {
            break;
        }
    }
    p
}

/// Number of polishing sweeps tried after the linear pipeline.
const POLISH_SWEEPS: usize = 300;

/// Conformal map of a genus-0 mesh onto the unit sphere.
pub fn spherical_conformal_map(mesh: &TriMesh) -> Result<ParamMap> {
    let l = cotangent_laplacian(mesh, mesh.vertices())?;
    let big = most_regular_face(mesh);
    let mut z = planar_embedding(mesh, &l, big)?;

    let centre = z.iter().sum::<Complex>() / z.len() as f64;
    let scale = median(z.iter().map(|w| (w - centre).norm()).collect());
    for w in &mut z {
        // Conjugation undoes the orientation reversal of the north-pole chart.
        *w = ((*w - centre) / scale).conj();
    }
    let mut p: Vec<Vec3> = z.iter().map(|&w| inverse_stereographic(w, Pole::North)).collect();

    // Re-solve the northern cap, where the big triangle sits, in the south-pole chart.
    let w: Vec<Option<Complex>> = p.iter().map(|q| stereographic(q, Pole::South)).collect();
    let fixed: Vec<(usize, Complex)> =
        (0..p.len()).filter(|&i| p[i].z <= 0.0).filter_map(|i| w[i].map(|w| (i, w))).collect();
    if fixed.len() >= 3 && fixed.len() < p.len() {
        let solved = solve_dirichlet(&l, &fixed)?;
        let repaired: Vec<Vec3> = solved.iter().map(|&w| inverse_stereographic(w, Pole::South)).collect();
        if count_inverted_faces(mesh.faces(), &repaired) <= count_inverted_faces(mesh.faces(), &p) {
            p = repaired;
        }
    }

    if 2 * count_inverted_faces(mesh.faces(), &p) > mesh.num_faces() {
        for q in &mut p {
            q.z = -q.z;
        }
    }
    let weights = lumped_mass(mesh, mesh.vertices()).0;
    balance_on_sphere(&mut p, &weights);

    let polished = harmonic_polish(&l, &p, &weights, POLISH_SWEEPS);
    if count_inverted_faces(mesh.faces(), &polished) == 0 && mean_abs_mu(mesh, &polished)? < mean_abs_mu(mesh, &p)? {
        p = polished;
    }

    let flips = count_inverted_faces(mesh.faces(), &p);
    if flips > 0 {
        return Err(Error::Convergence(format!("spherical conformal map has {flips} folded faces")));
    }
    Ok(ParamMap { source: mesh.clone(), positions: p, radii: EllipsoidRadii::unit() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;

    #[test]
    fn sphere_mesh_maps_almost_isometrically() {
        let m = models::geodesic_sphere(10);
        let map = spherical_conformal_map(&m).unwrap();
        assert!(map.positions.iter().all(|p| (p.norm() - 1.0).abs() < 1e-9));
        assert_eq!(map.overlaps(), 0);
        let mu = mean_abs_mu(&m, &map.positions).unwrap();
        assert!(mu < 0.05, "{mu}");
    }

    #[test]
    fn icosahedron_is_symmetric() {
        let m = models::icosahedron();
        let map = spherical_conformal_map(&m).unwrap();
        let mu = crate::qc::beltrami_of_surface_map(m.faces(), m.vertices(), &map.positions).unwrap();
        let (lo, hi) = mu.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), z| (lo.min(z.norm()), hi.max(z.norm())));
        assert!(hi - lo < 1e-6, "{lo} {hi}");
    }

    #[test]
    fn elongated_models_are_flip_free() {
        for m in [models::banana(12), models::peanut(12), models::bumpy_ellipsoid(12)] {
            let map = spherical_conformal_map(&m).unwrap();
            assert_eq!(map.overlaps(), 0);
            let mu = mean_abs_mu(&m, &map.positions).unwrap();
            assert!(mu < 0.25, "{mu}");
        }
    }
}
