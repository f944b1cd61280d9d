//! Small dense matrix helpers. Parameter counts here are tiny (k rarely
//! exceeds 10), so plain row-major storage with LU / Cholesky factorizations
//! is all the model fitting and covariance work needs.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    pub nrows: usize,
    pub ncols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Matrix {
            nrows,
            ncols,
            data: vec![0.0; nrows * ncols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(nrows * ncols);
        for r in rows {
            assert_eq!(r.len(), ncols, "ragged rows");
            data.extend_from_slice(r);
        }
        Matrix { nrows, ncols, data }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.ncols);
        (0..self.nrows)
            .map(|i| dot(self.row(i), v))
            .collect()
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.ncols, other.nrows);
        let mut out = Matrix::zeros(self.nrows, other.ncols);
        for i in 0..self.nrows {
            for l in 0..self.ncols {
                let a = self[(i, l)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.ncols {
                    out[(i, j)] += a * other[(l, j)];
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.ncols, self.nrows);
        for i in 0..self.nrows {
            for j in 0..self.ncols {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    /// (A + A')/2, forcing exact symmetry.
    pub fn symmetrized(&self) -> Matrix {
        assert_eq!(self.nrows, self.ncols);
        let mut out = self.clone();
        for i in 0..self.nrows {
            for j in 0..i {
                let v = 0.5 * (self[(i, j)] + self[(j, i)]);
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        out
    }

    pub fn scaled(&self, s: f64) -> Matrix {
        let mut out = self.clone();
        for v in &mut out.data {
            *v *= s;
        }
        out
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut out = self.clone();
        for (v, o) in out.data.iter_mut().zip(other.data.iter()) {
            *v += o;
        }
        out
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self[(i, i)]).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.ncols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        let idx = i * self.ncols + j;
        &mut self.data[idx]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

pub fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// LU decomposition with partial pivoting; returns (LU, perm, swap sign) or
/// an error carrying a rough condition estimate when a pivot collapses.
fn lu_decompose(a: &Matrix) -> Result<(Matrix, Vec<usize>)> {
    assert_eq!(a.nrows, a.ncols);
    let n = a.nrows;
    let mut lu = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut max_pivot = 0.0_f64;
    let mut min_pivot = f64::INFINITY;
    for col in 0..n {
        let mut pivot_row = col;
        let mut pivot_val = lu[(col, col)].abs();
        for r in (col + 1)..n {
            if lu[(r, col)].abs() > pivot_val {
                pivot_val = lu[(r, col)].abs();
                pivot_row = r;
            }
        }
        max_pivot = max_pivot.max(pivot_val);
        min_pivot = min_pivot.min(pivot_val);
        if pivot_val < 1e-300 || !pivot_val.is_finite() {
            let cond = if min_pivot > 0.0 { max_pivot / min_pivot } else { f64::INFINITY };
            return Err(Error::Inference(format!(
                "singular matrix (pivot {pivot_val:.3e} at column {col}, condition estimate {cond:.3e})"
            )));
        }
        if pivot_row != col {
            perm.swap(col, pivot_row);
            for j in 0..n {
                let tmp = lu[(col, j)];
                lu[(col, j)] = lu[(pivot_row, j)];
                lu[(pivot_row, j)] = tmp;
            }
        }
        for r in (col + 1)..n {
            let factor = lu[(r, col)] / lu[(col, col)];
            lu[(r, col)] = factor;
            for j in (col + 1)..n {
                let sub = factor * lu[(col, j)];
                lu[(r, j)] -= sub;
            }
        }
    }
    Ok((lu, perm))
}

fn lu_solve(lu: &Matrix, perm: &[usize], b: &[f64]) -> Vec<f64> {
    let n = lu.nrows;
    let mut x: Vec<f64> = perm.iter().map(|&p| b[p]).collect();
    for i in 1..n {
        for j in 0..i {
            x[i] -= lu[(i, j)] * x[j];
        }
    }
    for i in (0..n).rev() {
        for j in (i + 1)..n {
            x[i] -= lu[(i, j)] * x[j];
        }
        x[i] /= lu[(i, i)];
    }
    x
}

/// Solve A x = b.
pub fn solve(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    let (lu, perm) = lu_decompose(a)?;
    Ok(lu_solve(&lu, &perm, b))
}

/// Dense inverse via LU.
pub fn inverse(a: &Matrix) -> Result<Matrix> {
    let n = a.nrows;
    let (lu, perm) = lu_decompose(a)?;
    let mut inv = Matrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for col in 0..n {
        e[col] = 1.0;
        let x = lu_solve(&lu, &perm, &e);
        for (row, v) in x.into_iter().enumerate() {
            inv[(row, col)] = v;
        }
        e[col] = 0.0;
    }
    Ok(inv)
}

/// Cholesky factor (lower) of a symmetric matrix; None when not positive
/// definite.
pub fn cholesky(a: &Matrix) -> Option<Matrix> {
    let n = a.nrows;
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[(i, j)];
            for p in 0..j {
                s -= l[(i, p)] * l[(j, p)];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return None;
                }
                l[(i, i)] = s.sqrt();
            } else {
                l[(i, j)] = s / l[(j, j)];
            }
        }
    }
    Some(l)
}

/// Solve A x = b given the Cholesky factor L of A.
pub fn cholesky_solve(l: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = l.nrows;
    let mut y = b.to_vec();
    for i in 0..n {
        for j in 0..i {
            y[i] -= l[(i, j)] * y[j];
        }
        y[i] /= l[(i, i)];
    }
    for i in (0..n).rev() {
        for j in (i + 1)..n {
            y[i] -= l[(j, i)] * y[j];
        }
        y[i] /= l[(i, i)];
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_and_inverse_agree() {
        let a = Matrix::from_rows(&[
            vec![4.0, 1.0, 0.5],
            vec![1.0, 3.0, -0.2],
            vec![0.5, -0.2, 2.0],
        ]);
        let b = vec![1.0, 2.0, 3.0];
        let x = solve(&a, &b).unwrap();
        let back = a.matvec(&x);
        for (u, v) in back.iter().zip(b.iter()) {
            assert!((u - v).abs() < 1e-12);
        }
        let inv = inverse(&a).unwrap();
        let prod = a.matmul(&inv);
        let id = Matrix::identity(3);
        for i in 0..3 {
            for j in 0..3 {
                assert!((prod[(i, j)] - id[(i, j)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cholesky_matches_lu_on_spd() {
        let a = Matrix::from_rows(&[
            vec![4.0, 1.0, 0.5],
            vec![1.0, 3.0, -0.2],
            vec![0.5, -0.2, 2.0],
        ]);
        let b = vec![0.3, -1.0, 2.5];
        let l = cholesky(&a).expect("spd");
        let x1 = cholesky_solve(&l, &b);
        let x2 = solve(&a, &b).unwrap();
        for (u, v) in x1.iter().zip(x2.iter()) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        assert!(cholesky(&a).is_none());
    }

    #[test]
    fn singular_reports_condition() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        let err = solve(&a, &[1.0, 1.0]).unwrap_err();
        assert!(err.to_string().contains("singular"));
    }
}
