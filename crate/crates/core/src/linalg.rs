//! Sparse linear solves for the Newton iterations.
//!
//! Two-dimensional systems go to a direct sparse LU. Three-dimensional
//! systems, whose LU fill is expensive, use BiCGSTAB preconditioned by ILU(0)
//! and fall back to the direct solver when the iteration stalls.

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use faer::Col;

use crate::error::{Error, Result};

/// Compressed sparse row matrix with sorted column indices and summed
/// duplicates.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; n + 1];
        for &(i, _, _) in triplets {
            counts[i + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let mut fill = counts.clone();
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(i, j, v) in triplets {
            cols[fill[i]] = j;
            vals[fill[i]] = v;
            fill[i] += 1;
        }
        let mut row_ptr = vec![0usize; n + 1];
        let mut out_cols = Vec::with_capacity(triplets.len());
        let mut out_vals = Vec::with_capacity(triplets.len());
        let mut row: Vec<(usize, f64)> = Vec::new();
        for i in 0..n {
            row.clear();
            row.extend((counts[i]..counts[i + 1]).map(|k| (cols[k], vals[k])));
            row.sort_by_key(|e| e.0);
            for &(j, v) in &row {
                if out_cols.len() > row_ptr[i] && *out_cols.last().unwrap() == j {
                    *out_vals.last_mut().unwrap() += v;
                } else {
                    out_cols.push(j);
                    out_vals.push(v);
                }
            }
            row_ptr[i + 1] = out_cols.len();
        }
        Self {
            n,
            row_ptr,
            cols: out_cols,
            vals: out_vals,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mul(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.vals[k] * x[self.cols[k]];
            }
            y[i] = s;
        }
    }

    fn triplets(&self) -> Vec<Triplet<usize, usize, f64>> {
        let mut t = Vec::with_capacity(self.vals.len());
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                t.push(Triplet::new(i, self.cols[k], self.vals[k]));
            }
        }
        t
    }
}

/// Incomplete LU factorization with the sparsity pattern of the matrix.
struct Ilu0 {
    m: CsrMatrix,
    diag: Vec<usize>,
}

impl Ilu0 {
    fn new(a: &CsrMatrix) -> Result<Self> {
        let mut m = a.clone();
        let n = m.n;
        let mut diag = vec![usize::MAX; n];
        for i in 0..n {
            for k in m.row_ptr[i]..m.row_ptr[i + 1] {
                if m.cols[k] == i {
                    diag[i] = k;
                }
            }
            if diag[i] == usize::MAX {
                return Err(Error::Numerical(format!("row {i} has no diagonal entry")));
            }
        }
        let mut pos = vec![usize::MAX; n];
        for i in 0..n {
            let (start, end) = (m.row_ptr[i], m.row_ptr[i + 1]);
            for k in start..end {
                pos[m.cols[k]] = k;
            }
            for k in start..end {
                let c = m.cols[k];
                if c >= i {
                    break;
                }
                let pivot = m.vals[diag[c]];
                if pivot == 0.0 {
                    return Err(Error::Numerical("zero pivot in ILU(0)".into()));
                }
                let l = m.vals[k] / pivot;
                m.vals[k] = l;
                for kk in diag[c] + 1..m.row_ptr[c + 1] {
                    let p = pos[m.cols[kk]];
                    if p != usize::MAX {
                        m.vals[p] -= l * m.vals[kk];
                    }
                }
            }
            for k in start..end {
                pos[m.cols[k]] = usize::MAX;
            }
            if m.vals[diag[i]] == 0.0 {
                return Err(Error::Numerical("zero pivot in ILU(0)".into()));
            }
        }
        Ok(Self { m, diag })
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let m = &self.m;
        for i in 0..m.n {
            let mut s = r[i];
            for k in m.row_ptr[i]..self.diag[i] {
                s -= m.vals[k] * z[m.cols[k]];
            }
            z[i] = s;
        }
        for i in (0..m.n).rev() {
            let mut s = z[i];
            for k in self.diag[i] + 1..m.row_ptr[i + 1] {
                s -= m.vals[k] * z[m.cols[k]];
            }
            z[i] = s / m.vals[self.diag[i]];
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Right-preconditioned BiCGSTAB. Returns `None` when the iteration stalls.
fn bicgstab(a: &CsrMatrix, b: &[f64], rel_tol: f64, max_iter: usize) -> Option<Vec<f64>> {
    let n = a.n;
    let pre = Ilu0::new(a).ok()?;
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Some(x);
    }
    let mut r = b.to_vec();
    let r0 = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut phat = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut shat = vec![0.0; n];
    let mut t = vec![0.0; n];
    for _ in 0..max_iter {
        let rho_new = dot(&r0, &r);
        if rho_new.abs() < 1e-300 {
            return None;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        pre.apply(&p, &mut phat);
        a.mul(&phat, &mut v);
        let denom = dot(&r0, &v);
        if denom.abs() < 1e-300 {
            return None;
        }
        alpha = rho / denom;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm(&s) <= rel_tol * bnorm {
            for i in 0..n {
                x[i] += alpha * phat[i];
            }
            return Some(x);
        }
        pre.apply(&s, &mut shat);
        a.mul(&shat, &mut t);
        let tt = dot(&t, &t);
        if tt == 0.0 {
            return None;
        }
        omega = dot(&t, &s) / tt;
        for i in 0..n {
            x[i] += alpha * phat[i] + omega * shat[i];
            r[i] = s[i] - omega * t[i];
        }
        if !x[0].is_finite() {
            return None;
        }
        if norm(&r) <= rel_tol * bnorm {
            return Some(x);
        }
        if omega == 0.0 {
            return None;
        }
    }
    None
}

fn direct(a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.n;
    let m = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &a.triplets())
        .map_err(|e| Error::Numerical(format!("sparse assembly: {e:?}")))?;
    let lu = m
        .sp_lu()
        .map_err(|e| Error::Numerical(format!("sparse LU: {e:?}")))?;
    let rhs = Col::<f64>::from_fn(n, |i| b[i]);
    let x = lu.solve(&rhs);
    let out: Vec<f64> = (0..n).map(|i| x[i]).collect();
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("singular linear system".into()));
    }
    Ok(out)
}

/// Which algorithm to use for a system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinearMethod {
    Direct,
    Iterative,
}

impl LinearMethod {
    pub fn for_dim(dim: usize) -> Self {
        if dim >= 3 {
            LinearMethod::Iterative
        } else {
            LinearMethod::Direct
        }
    }
}

/// Solves `A x = b`.
pub fn solve(a: &CsrMatrix, b: &[f64], method: LinearMethod) -> Result<Vec<f64>> {
    match method {
        LinearMethod::Direct => direct(a, b),
        LinearMethod::Iterative => match bicgstab(a, b, 1e-11, 4000) {
            Some(x) => Ok(x),
            None => direct(a, b),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian(n: usize) -> (CsrMatrix, Vec<f64>) {
        let mut t = Vec::new();
        let idx = |i: usize, j: usize| i * n + j;
        for i in 0..n {
            for j in 0..n {
                t.push((idx(i, j), idx(i, j), 4.2));
                if i > 0 {
                    t.push((idx(i, j), idx(i - 1, j), -1.0));
                }
                if i + 1 < n {
                    t.push((idx(i, j), idx(i + 1, j), -1.1));
                }
                if j > 0 {
                    t.push((idx(i, j), idx(i, j - 1), -0.9));
                }
                if j + 1 < n {
                    t.push((idx(i, j), idx(i, j + 1), -1.0));
                }
            }
        }
        let b = (0..n * n).map(|k| (k % 5) as f64 - 2.0).collect();
        (CsrMatrix::from_triplets(n * n, &t), b)
    }

    fn residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
        let mut y = vec![0.0; b.len()];
        a.mul(x, &mut y);
        y.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn direct_and_iterative_agree() {
        let (a, b) = laplacian(30);
        let x1 = solve(&a, &b, LinearMethod::Direct).unwrap();
        let x2 = solve(&a, &b, LinearMethod::Iterative).unwrap();
        assert!(residual(&a, &x1, &b) < 1e-10);
        assert!(residual(&a, &x2, &b) < 1e-8);
    }

    #[test]
    fn duplicates_are_summed() {
        let a = CsrMatrix::from_triplets(2, &[(0, 0, 1.0), (0, 0, 1.0), (1, 1, 3.0), (1, 0, 1.0)]);
        let x = solve(&a, &[2.0, 4.0], LinearMethod::Direct).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
    }
}
