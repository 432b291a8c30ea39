//! Symmetric sparse matrices and SPD solves.
//!
//! Factorization is a sparse Cholesky from `faer`; a Jacobi-preconditioned
//! conjugate gradient takes over when the factorization fails or its residual is
//! not small enough after refinement.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Llt;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};

use crate::error::{Error, Result};
use crate::par;

/// Relative residual every successful solve must reach.
pub const SOLVE_TOLERANCE: f64 = 1e-10;

/// Square matrix stored as full CSR (both triangles), symmetric by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSymMatrix {
    /// Sums duplicate `(row, col, value)` entries. The caller supplies both
    /// `(i, j)` and `(j, i)` for off-diagonal terms.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        // Stable sort keeps insertion order among duplicates, so sums are reproducible.
        triplets.sort_by_key(|t| (t.0, t.1));
        let mut row_ptr = vec![0; n + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in triplets {
            assert!(i < n && j < n, "entry ({i}, {j}) outside a {n}x{n} matrix");
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self { n, row_ptr, col_idx, values }
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        Self::from_triplets(d.len(), d.iter().enumerate().map(|(i, &v)| (i, i, v)).collect())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `(column, value)` pairs of row `i`, sorted by column.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).map(|(_, v)| v).sum()).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest `|A_ij - A_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        par::map_range(self.n, |i| self.row(i).map(|(j, v)| v * x[j]).sum())
    }

    /// `diag(d) + s · self`.
    pub fn scaled_plus_diagonal(&self, s: f64, d: &[f64]) -> Self {
        assert_eq!(d.len(), self.n);
        let mut t: Vec<(usize, usize, f64)> = Vec::with_capacity(self.nnz() + self.n);
        for (i, &di) in d.iter().enumerate() {
            t.extend(self.row(i).map(|(j, v)| (i, j, s * v)));
            t.push((i, i, di));
        }
        Self::from_triplets(self.n, t)
    }

    fn to_faer(&self) -> Option<SparseColMat<usize, f64>> {
        let t: Vec<Triplet<usize, usize, f64>> = (0..self.n)
            .flat_map(|i| self.row(i).map(move |(j, v)| Triplet::new(i, j, v)))
            .collect();
        SparseColMat::try_new_from_triplets(self.n, self.n, &t).ok()
    }
}

/// Reusable solver for one SPD matrix.
pub struct SpdSolver<'a> {
    matrix: &'a SparseSymMatrix,
    llt: Option<Llt<usize, f64>>,
}

impl<'a> SpdSolver<'a> {
    pub fn new(matrix: &'a SparseSymMatrix) -> Self {
        faer::set_global_parallelism(faer::Par::Seq);
        let llt = matrix.to_faer().and_then(|m| m.sp_cholesky(Side::Lower).ok());
        if llt.is_none() {
            log::warn!("sparse Cholesky failed on a {}x{} system; using conjugate gradient", matrix.n, matrix.n);
        }
        Self { matrix, llt }
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.matrix.n;
        assert_eq!(b.len(), n);
        let bnorm = norm(b);
        if bnorm == 0.0 {
            return Ok(vec![0.0; n]);
        }
        let mut x = vec![0.0; n];
        if let Some(llt) = &self.llt {
            let mut r = b.to_vec();
            for _ in 0..4 {
                let dx = llt.solve(Mat::<f64>::from_fn(n, 1, |i, _| r[i]));
                for (i, xi) in x.iter_mut().enumerate() {
                    *xi += dx[(i, 0)];
                }
                r = residual(self.matrix, &x, b);
                if norm(&r) / bnorm < SOLVE_TOLERANCE {
                    return Ok(x);
                }
            }
            log::debug!(
                "Cholesky residual {:.3e} above tolerance; refining with conjugate gradient",
                norm(&r) / bnorm
            );
        }
        conjugate_gradient(self.matrix, b, x)
    }
}

/// Solves `A x = b` for SPD `A`.
pub fn solve_spd(matrix: &SparseSymMatrix, b: &[f64]) -> Result<Vec<f64>> {
    SpdSolver::new(matrix).solve(b)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn residual(a: &SparseSymMatrix, x: &[f64], b: &[f64]) -> Vec<f64> {
    a.mul_vec(x).iter().zip(b).map(|(ax, bi)| bi - ax).collect()
}

/// Jacobi-preconditioned CG, at most `10 n` iterations.
pub fn conjugate_gradient(a: &SparseSymMatrix, b: &[f64], mut x: Vec<f64>) -> Result<Vec<f64>> {
    let n = a.n;
    let bnorm = norm(b);
    let inv_diag: Vec<f64> = a.diagonal().iter().map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 }).collect();
    let mut r = residual(a, &x, b);
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for _ in 0..10 * n.max(1) {
        if norm(&r) / bnorm < SOLVE_TOLERANCE {
            return Ok(x);
        }
        let ap = a.mul_vec(&p);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            break;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        z = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    // Recompute the true residual before giving up.
    let res = norm(&residual(a, &x, b)) / bnorm;
    if res < SOLVE_TOLERANCE {
        Ok(x)
    } else {
        Err(Error::Solve { residual: res, reason: "conjugate gradient did not converge".into() })
    }
}
