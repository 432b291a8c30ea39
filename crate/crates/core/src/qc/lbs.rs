//! Linear Beltrami Solver.
//!
//! Two discretizations are offered. [`lbs_dirichlet`] assembles the elliptic
//! system `∇·(A∇u) = 0`, `∇·(A∇v) = 0` and suits subdomains whose whole boundary
//! is prescribed. [`lbs_reconstruct`] minimizes `Σ_T ω_T |f_z̄ − μ_T f_z|²` over
//! piecewise-linear maps with a few pinned vertices, which needs no boundary data.
//! Both reproduce a piecewise-linear map exactly when given its own μ.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::par;
use crate::sparse::{SparseSymMatrix, SpdSolver};
use crate::Complex;

/// Coefficients with `|μ|` at or above this bound are rejected.
pub const MU_LIMIT: f64 = 1.0 - 1e-6;

fn check_inputs(faces: &[[usize; 3]], n: usize, mu: &[Complex], constraints: &[(usize, Complex)]) -> Result<()> {
    if mu.len() != faces.len() {
        return Err(Error::InvalidInput(format!("{} coefficients for {} faces", mu.len(), faces.len())));
    }
    if let Some((face, m)) = mu.iter().enumerate().find(|(_, m)| !(m.norm() < MU_LIMIT)) {
        return Err(Error::BeltramiOutOfRange { face, modulus: m.norm() });
    }
    let mut used = vec![false; n];
    for f in faces {
        for &v in f {
            used[v] = true;
        }
    }
    for &(v, p) in constraints {
        if v >= n || !p.re.is_finite() || !p.im.is_finite() {
            return Err(Error::InvalidInput(format!("invalid constraint on vertex {v}")));
        }
        used[v] = true;
    }
    if let Some(v) = used.iter().position(|u| !u) {
        return Err(Error::InvalidInput(format!("vertex {v} belongs to no face")));
    }
    Ok(())
}

/// Maps every vertex to either a pinned value or an unknown slot.
struct Unknowns {
    slot: Vec<Option<usize>>,
    pinned: HashMap<usize, Complex>,
    count: usize,
}

impl Unknowns {
    fn new(n: usize, constraints: &[(usize, Complex)]) -> Self {
        let pinned: HashMap<usize, Complex> = constraints.iter().copied().collect();
        let mut slot = vec![None; n];
        let mut count = 0;
        for (v, s) in slot.iter_mut().enumerate() {
            if !pinned.contains_key(&v) {
                *s = Some(count);
                count += 1;
            }
        }
        Self { slot, pinned, count }
    }

    fn assemble(&self, target: Vec<Option<Complex>>, solution: impl Fn(usize) -> Complex) -> Vec<Complex> {
        target.into_iter().enumerate().map(|(v, p)| p.unwrap_or_else(|| solution(self.slot[v].unwrap()))).collect()
    }
}

/// Elliptic LBS with Dirichlet data on `constraints`.
pub fn lbs_dirichlet(
    faces: &[[usize; 3]],
    source: &[Complex],
    mu: &[Complex],
    constraints: &[(usize, Complex)],
) -> Result<Vec<Complex>> {
    let n = source.len();
    check_inputs(faces, n, mu, constraints)?;
    if constraints.len() < 2 {
        return Err(Error::InvalidInput("the solver needs at least two constrained vertices".into()));
    }
    let per_face = par::try_map_range(faces.len(), |t| {
        let f = faces[t];
        let z = f.map(|v| source[v]);
        let twice_signed = ((z[1] - z[0]).conj() * (z[2] - z[0])).im;
        if !(twice_signed.abs() > 0.0) {
            return Err(Error::DegenerateFace { face: t, area: 0.0 });
        }
        let grad: [(f64, f64); 3] = std::array::from_fn(|k| {
            let e = z[(k + 2) % 3] - z[(k + 1) % 3];
            (-e.im / twice_signed, e.re / twice_signed)
        });
        let (rho, tau) = (mu[t].re, mu[t].im);
        let s = 1.0 - mu[t].norm_sqr();
        let a1 = ((rho - 1.0).powi(2) + tau * tau) / s;
        let a2 = -2.0 * tau / s;
        let a3 = ((1.0 + rho).powi(2) + tau * tau) / s;
        let area = 0.5 * twice_signed.abs();
        let mut out = [(0, 0, 0.0); 9];
        for i in 0..3 {
            for j in 0..3 {
                let (gx, gy) = grad[j];
                let (ax, ay) = (a1 * gx + a2 * gy, a2 * gx + a3 * gy);
                out[3 * i + j] = (f[i], f[j], area * (grad[i].0 * ax + grad[i].1 * ay));
            }
        }
        Ok(out)
    })?;

    let unknowns = Unknowns::new(n, constraints);
    let mut triplets = Vec::new();
    let mut rhs = vec![Complex::new(0.0, 0.0); unknowns.count];
    for (i, j, k) in per_face.into_iter().flatten() {
        let Some(si) = unknowns.slot[i] else { continue };
        match unknowns.slot[j] {
            Some(sj) => triplets.push((si, sj, k)),
            None => rhs[si] -= unknowns.pinned[&j] * k,
        }
    }
    let system = SparseSymMatrix::from_triplets(unknowns.count, triplets);
    let solver = SpdSolver::new(&system);
    let u = solver.solve(&rhs.iter().map(|c| c.re).collect::<Vec<_>>())?;
    let v = solver.solve(&rhs.iter().map(|c| c.im).collect::<Vec<_>>())?;
    let target = (0..n).map(|i| unknowns.pinned.get(&i).copied()).collect();
    Ok(unknowns.assemble(target, |s| Complex::new(u[s], v[s])))
}

/// Weighted least-squares LBS with point constraints.
pub fn lbs_weighted(
    faces: &[[usize; 3]],
    source: &[Complex],
    mu: &[Complex],
    constraints: &[(usize, Complex)],
    weights: &[f64],
) -> Result<Vec<Complex>> {
    let n = source.len();
    check_inputs(faces, n, mu, constraints)?;
    if constraints.len() < 2 {
        return Err(Error::InvalidInput("the solver needs at least two constrained vertices".into()));
    }
    if weights.len() != faces.len() || weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
        return Err(Error::InvalidInput("face weights must be positive, one per face".into()));
    }
    // Per face, f_z̄ - μ f_z = Σ_k c_k w_k is complex-linear in the target positions
    // w_k; with w_k = x_k + i y_k the real unknowns x_k, y_k carry coefficients c_k
    // and i c_k.
    let per_face = par::try_map_range(faces.len(), |t| {
        let f = faces[t];
        let z = f.map(|v| source[v]);
        let (dz1, dz2) = (z[1] - z[0], z[2] - z[0]);
        let d = dz1 * dz2.conj() - dz2 * dz1.conj();
        if !(d.norm() > 0.0) {
            return Err(Error::DegenerateFace { face: t, area: 0.0 });
        }
        let a1 = dz2.conj() / d;
        let a2 = -dz1.conj() / d;
        let b1 = -dz2 / d;
        let b2 = dz1 / d;
        let a = [-(a1 + a2), a1, a2];
        let b = [-(b1 + b2), b1, b2];
        let c: [Complex; 3] = std::array::from_fn(|k| b[k] - mu[t] * a[k]);
        let g: [(usize, Complex); 6] = std::array::from_fn(|p| {
            let k = p / 2;
            let coeff = if p % 2 == 0 { c[k] } else { Complex::new(0.0, 1.0) * c[k] };
            (2 * f[k] + p % 2, coeff)
        });
        let mut out = [(0, 0, 0.0); 36];
        for p in 0..6 {
            for q in 0..6 {
                out[6 * p + q] = (g[p].0, g[q].0, weights[t] * (g[p].1.conj() * g[q].1).re);
            }
        }
        Ok(out)
    })?;

    let unknowns = Unknowns::new(n, constraints);
    let real_slot = |r: usize| unknowns.slot[r / 2].map(|s| 2 * s + r % 2);
    let pinned_value = |r: usize| {
        let p = unknowns.pinned[&(r / 2)];
        if r.is_multiple_of(2) {
            p.re
        } else {
            p.im
        }
    };
    let mut triplets = Vec::new();
    let mut rhs = vec![0.0; 2 * unknowns.count];
    for (p, q, k) in per_face.into_iter().flatten() {
        let Some(sp) = real_slot(p) else { continue };
        match real_slot(q) {
            Some(sq) => triplets.push((sp, sq, k)),
            None => rhs[sp] -= k * pinned_value(q),
        }
    }
    let system = SparseSymMatrix::from_triplets(2 * unknowns.count, triplets);
    let x = SpdSolver::new(&system).solve(&rhs)?;
    let target = (0..n).map(|i| unknowns.pinned.get(&i).copied()).collect();
    Ok(unknowns.assemble(target, |s| Complex::new(x[2 * s], x[2 * s + 1])))
}

/// [`lbs_weighted`] with source face areas as weights.
pub fn lbs_reconstruct(
    faces: &[[usize; 3]],
    source: &[Complex],
    mu: &[Complex],
    constraints: &[(usize, Complex)],
) -> Result<Vec<Complex>> {
    let weights: Vec<f64> = faces
        .iter()
        .map(|f| 0.5 * ((source[f[1]] - source[f[0]]).conj() * (source[f[2]] - source[f[0]])).im.abs())
        .collect();
    lbs_weighted(faces, source, mu, constraints, &weights)
}
