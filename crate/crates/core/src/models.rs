//! Procedural closed genus-0 test surfaces and population presets.
//!
//! All models are built from a geodesic subdivision of the icosahedron followed by
//! a smooth injective deformation, so they share the sphere's connectivity and are
//! guaranteed to be valid meshes.

use std::collections::BTreeMap;

use crate::mesh::TriMesh;
use crate::{Complex, EllipsoidRadii, Vec3};

pub fn regular_tetrahedron() -> TriMesh {
    // Alternate cube corners have edge 2√2; scale to edge 1.
    let s = 1.0 / (2.0 * 2f64.sqrt());
    let v = vec![
        Vec3::new(1.0, 1.0, 1.0) * s,
        Vec3::new(1.0, -1.0, -1.0) * s,
        Vec3::new(-1.0, 1.0, -1.0) * s,
        Vec3::new(-1.0, -1.0, 1.0) * s,
    ];
    TriMesh::new(v, vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]]).expect("tetrahedron is valid")
}

fn icosahedron_raw() -> (Vec<Vec3>, Vec<[usize; 3]>) {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let v: Vec<Vec3> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let f = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    (v, f)
}

/// Regular icosahedron inscribed in the unit sphere.
pub fn icosahedron() -> TriMesh {
    let (v, f) = icosahedron_raw();
    TriMesh::new(v, f).expect("icosahedron is valid")
}

/// Unit-sphere mesh from splitting every icosahedron edge into `freq` segments:
/// `10·freq² + 2` vertices, `20·freq²` faces.
pub fn geodesic_sphere(freq: usize) -> TriMesh {
    assert!(freq >= 1, "frequency must be at least 1");
    let (base, base_faces) = icosahedron_raw();
    let n = freq;
    // Each lattice point is keyed by its integer barycentric weights on icosahedron
    // vertices, which makes points on shared edges coincide.
    let mut index: BTreeMap<Vec<(usize, usize)>, usize> = BTreeMap::new();
    let mut vertices = Vec::with_capacity(10 * n * n + 2);
    let mut faces = Vec::with_capacity(20 * n * n);
    for bf in &base_faces {
        let mut id = |i: usize, j: usize| -> usize {
            let mut key: Vec<(usize, usize)> =
                [(bf[0], n - i - j), (bf[1], i), (bf[2], j)].into_iter().filter(|&(_, w)| w > 0).collect();
            key.sort_unstable();
            *index.entry(key).or_insert_with(|| {
                let p = (base[bf[0]] * (n - i - j) as f64 + base[bf[1]] * i as f64 + base[bf[2]] * j as f64)
                    / n as f64;
                vertices.push(p.normalize());
                vertices.len() - 1
            })
        };
        for i in 0..n {
            for j in 0..n - i {
                faces.push([id(i, j), id(i + 1, j), id(i, j + 1)]);
                if i + j + 1 < n {
                    faces.push([id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
                }
            }
        }
    }
    TriMesh::new(vertices, faces).expect("geodesic sphere is valid")
}

/// Icosphere from `level` rounds of midpoint subdivision with re-projection to the
/// unit sphere (`10·4^level + 2` vertices).
pub fn icosphere(level: u32) -> TriMesh {
    let (mut v, mut f) = icosahedron_raw();
    for _ in 0..level {
        let mut mid: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut next = Vec::with_capacity(4 * f.len());
        for t in &f {
            let mut m = [0; 3];
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                m[k] = *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                    v.push((v[a] + v[b]).normalize());
                    v.len() - 1
                });
            }
            next.extend([[t[0], m[0], m[2]], [t[1], m[1], m[0]], [t[2], m[2], m[1]], [m[0], m[1], m[2]]]);
        }
        f = next;
    }
    TriMesh::new(v, f).expect("icosphere is valid")
}

/// Applies a position map to a geodesic sphere of frequency `freq`.
pub fn deformed_sphere(freq: usize, f: impl Fn(Vec3) -> Vec3) -> TriMesh {
    let s = geodesic_sphere(freq);
    let v = s.vertices().iter().map(|&p| f(p)).collect();
    TriMesh::new(v, s.faces().to_vec()).expect("deformation keeps the mesh valid")
}

/// Geodesic sphere scaled onto `E_{a,b,c}`.
pub fn ellipsoid(radii: &EllipsoidRadii, freq: usize) -> TriMesh {
    deformed_sphere(freq, |p| radii.from_sphere(&p))
}

/// Radially perturbed ellipsoid with a few smooth bumps.
pub fn bumpy_ellipsoid(freq: usize) -> TriMesh {
    deformed_sphere(freq, |p| {
        let r = 1.0 + 0.15 * (3.0 * p.x).sin() * (2.0 * p.y).cos() + 0.1 * (4.0 * p.z).sin();
        Vec3::new(1.4 * p.x, p.y, 0.8 * p.z) * r
    })
}

/// Two lobes joined by a waist, long axis along z.
pub fn peanut(freq: usize) -> TriMesh {
    deformed_sphere(freq, |p| {
        let s = 0.6 + 0.8 * p.z * p.z;
        Vec3::new(s * p.x, s * p.y, 2.0 * p.z)
    })
}

/// Curved elongated tube with a thicker head, loosely hippocampus-shaped.
pub fn banana(freq: usize) -> TriMesh {
    deformed_sphere(freq, |p| {
        let thick = 0.55 + 0.15 * p.z;
        let (x, y, z) = (thick * p.x, 0.8 * thick * p.y, 2.2 * p.z);
        // Bend the z axis into an arc of radius 3 in the xz-plane.
        let r = 3.0;
        let t = z / r;
        let centre = Vec3::new(r * (1.0 - t.cos()), 0.0, r * t.sin());
        centre + Vec3::new(t.cos(), 0.0, -t.sin()) * x + Vec3::y() * y
    })
}

/// Elongated box-like bar twisted about its long axis.
pub fn twisted_bar(freq: usize) -> TriMesh {
    deformed_sphere(freq, |p| {
        let q = Vec3::new(0.7 * p.x * (1.0 + 0.3 * p.x * p.x), 0.45 * p.y, 1.8 * p.z);
        let a = 1.2 * p.z;
        Vec3::new(q.x * a.cos() - q.y * a.sin(), q.x * a.sin() + q.y * a.cos(), q.z)
    })
}

/// Population `ratio × area` on faces whose centroid has `z > 0` and `area`
/// elsewhere, giving a two-valued density `ratio : 1`.
pub fn two_region_population(mesh: &TriMesh, ratio: f64) -> Vec<f64> {
    let v = mesh.vertices();
    mesh.faces()
        .iter()
        .zip(mesh.face_areas())
        .map(|(f, a)| {
            let cz = v[f[0]].z + v[f[1]].z + v[f[2]].z;
            if cz > 0.0 {
                ratio * a
            } else {
                a
            }
        })
        .collect()
}

/// Unit square split into `n × n` cells, two counterclockwise triangles each.
pub fn square_grid(n: usize) -> (Vec<Complex>, Vec<[usize; 3]>) {
    let mut v = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            v.push(Complex::new(i as f64 / n as f64, j as f64 / n as f64));
        }
    }
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut f = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            f.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            f.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    (v, f)
}

/// Indices of the boundary vertices of [`square_grid`].
pub fn square_grid_boundary(n: usize) -> Vec<usize> {
    let id = |i: usize, j: usize| j * (n + 1) + i;
    (0..=n)
        .flat_map(|j| (0..=n).map(move |i| (i, j)))
        .filter(|&(i, j)| i == 0 || j == 0 || i == n || j == n)
        .map(|(i, j)| id(i, j))
        .collect()
}
