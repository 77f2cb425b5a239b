//! Small dense linear algebra for the normal equations of local polynomial
//! fits (at most 4x4). Row-major `Vec<Vec<T>>` keeps the code obvious; the
//! systems are tiny.

use crate::scalar::Real;

pub type Matrix<T> = Vec<Vec<T>>;

/// LU factorization with partial pivoting of a square matrix.
#[derive(Debug, Clone)]
pub struct Lu<T> {
    lu: Matrix<T>,
    perm: Vec<usize>,
}

impl<T: Real> Lu<T> {
    /// Returns `None` when a pivot is exactly zero or non-finite.
    pub fn factor(a: &[Vec<T>]) -> Option<Self> {
        let n = a.len();
        let mut lu: Matrix<T> = a.to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut p = k;
            let mut best = lu[k][k].abs();
            for (i, row) in lu.iter().enumerate().skip(k + 1) {
                if row[k].abs() > best {
                    best = row[k].abs();
                    p = i;
                }
            }
            if best == T::zero() || !best.is_finite() {
                return None;
            }
            lu.swap(k, p);
            perm.swap(k, p);
            let pivot = lu[k][k];
            for i in (k + 1)..n {
                let f = lu[i][k] / pivot;
                lu[i][k] = f;
                for j in (k + 1)..n {
                    let t = lu[k][j];
                    lu[i][j] = lu[i][j] - f * t;
                }
            }
        }
        Some(Self { lu, perm })
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.lu.len();
        let mut x: Vec<T> = self.perm.iter().map(|&i| b[i]).collect();
        for i in 0..n {
            for j in 0..i {
                x[i] = x[i] - self.lu[i][j] * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in (i + 1)..n {
                x[i] = x[i] - self.lu[i][j] * x[j];
            }
            x[i] = x[i] / self.lu[i][i];
        }
        x
    }

    pub fn inverse(&self) -> Matrix<T> {
        let n = self.lu.len();
        let mut cols = Vec::with_capacity(n);
        for j in 0..n {
            let mut e = vec![T::zero(); n];
            e[j] = T::one();
            cols.push(self.solve(&e));
        }
        (0..n).map(|i| (0..n).map(|j| cols[j][i]).collect()).collect()
    }
}

pub fn norm1<T: Real>(a: &[Vec<T>]) -> T {
    let n = a.first().map_or(0, Vec::len);
    (0..n)
        .map(|j| a.iter().map(|row| row[j].abs()).sum::<T>())
        .fold(T::zero(), T::max)
}

/// Solves `a x = b` and reports the 1-norm condition number of `a`.
pub fn solve_with_condition<T: Real>(a: &[Vec<T>], b: &[T]) -> Option<(Vec<T>, T)> {
    let lu = Lu::factor(a)?;
    let cond = norm1(a) * norm1(&lu.inverse());
    Some((lu.solve(b), cond))
}

pub fn mat_vec<T: Real>(a: &[Vec<T>], v: &[T]) -> Vec<T> {
    a.iter()
        .map(|row| row.iter().zip(v).map(|(&x, &y)| x * y).sum())
        .collect()
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
pub fn symmetric_eigenvalues<T: Real>(a: &[Vec<T>]) -> Vec<T> {
    let n = a.len();
    let mut m = a.to_vec();
    let eps = T::epsilon();
    for _sweep in 0..100 {
        let off: T = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i][j] * m[i][j])
            .sum();
        let diag: T = (0..n).map(|i| m[i][i] * m[i][i]).sum();
        if off <= eps * eps * diag {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if m[p][q] == T::zero() {
                    continue;
                }
                let two = T::lit(2.0);
                let theta = (m[q][q] - m[p][p]) / (two * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k][p];
                    let mkq = m[k][q];
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p][k];
                    let mqk = m[q][k];
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut ev: Vec<T> = (0..n).map(|i| m[i][i]).collect();
    crate::scalar::sort_total(&mut ev);
    ev
}
