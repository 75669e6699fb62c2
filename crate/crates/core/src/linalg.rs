//! Minimal dense row-major matrix used by the layer maps.

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct Matrix<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Scalar> Matrix<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![S::zero(); rows * cols],
        }
    }

    /// Builds a matrix from row-major data. Panics if the length is not `rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<S>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Self { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> S {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: S) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[S] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[S] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [S] {
        &mut self.data
    }

    /// `out = self * x` (overwrites `out`).
    pub fn matvec_into(&self, x: &[S], out: &mut [S]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = S::zero();
            for (w, xi) in self.row(r).iter().zip(x) {
                acc += *w * *xi;
            }
            *o = acc;
        }
    }

    pub fn matvec(&self, x: &[S]) -> Vec<S> {
        let mut out = vec![S::zero(); self.rows];
        self.matvec_into(x, &mut out);
        out
    }

    /// `out += selfᵀ * y`.
    pub fn add_transpose_matvec(&self, y: &[S], out: &mut [S]) {
        debug_assert_eq!(y.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        for (r, yr) in y.iter().enumerate() {
            if yr.is_zero() {
                continue;
            }
            for (o, w) in out.iter_mut().zip(self.row(r)) {
                *o += *w * *yr;
            }
        }
    }

    /// `self += a ⊗ b` (outer product).
    pub fn add_outer(&mut self, a: &[S], b: &[S]) {
        debug_assert_eq!(a.len(), self.rows);
        debug_assert_eq!(b.len(), self.cols);
        let cols = self.cols;
        for (r, ar) in a.iter().enumerate() {
            if ar.is_zero() {
                continue;
            }
            let row = &mut self.data[r * cols..(r + 1) * cols];
            for (w, bc) in row.iter_mut().zip(b) {
                *w += *ar * *bc;
            }
        }
    }

    /// Largest singular value, by power iteration on `AᵀA`.
    pub fn spectral_norm(&self) -> S {
        if self.rows == 0 || self.cols == 0 || self.data.iter().all(|v| v.is_zero()) {
            return S::zero();
        }
        // Start from the column-sum direction plus a small ramp so we are not
        // orthogonal to the dominant singular vector by construction.
        let mut v: Vec<S> = (0..self.cols)
            .map(|c| {
                let s: S = (0..self.rows).map(|r| self.get(r, c).abs()).sum();
                s + S::lit(1e-3 * (1.0 + c as f64))
            })
            .collect();
        normalize(&mut v);
        let mut sigma = S::zero();
        let mut av = vec![S::zero(); self.rows];
        for _ in 0..5000 {
            self.matvec_into(&v, &mut av);
            let mut w = vec![S::zero(); self.cols];
            self.add_transpose_matvec(&av, &mut w);
            let n = norm2(&w);
            if n.is_zero() {
                return S::zero();
            }
            let next = n.sqrt();
            for x in w.iter_mut() {
                *x /= n;
            }
            v = w;
            let converged = (next - sigma).abs() <= S::epsilon() * S::lit(4.0) * next;
            sigma = next;
            if converged {
                break;
            }
        }
        sigma
    }
}

pub fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter().zip(b).map(|(x, y)| *x * *y).sum()
}

pub fn norm2<S: Scalar>(a: &[S]) -> S {
    dot(a, a).sqrt()
}

fn normalize<S: Scalar>(v: &mut [S]) {
    let n = norm2(v);
    if !n.is_zero() {
        for x in v.iter_mut() {
            *x /= n;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectral_norm_of_diagonal() {
        let m = Matrix::from_vec(3, 3, vec![2.0, 0.0, 0.0, 0.0, -5.0, 0.0, 0.0, 0.0, 1.0]);
        assert!((m.spectral_norm() - 5.0f64).abs() < 1e-12);
    }

    #[test]
    fn spectral_norm_rank_one() {
        // u vᵀ has a single singular value ‖u‖·‖v‖.
        let u = [1.0, 2.0];
        let v = [3.0, 0.0, 4.0];
        let m = Matrix::from_fn(2, 3, |r, c| u[r] * v[c]);
        assert!((m.spectral_norm() - 5.0f64.sqrt() * 5.0).abs() < 1e-10);
    }

    #[test]
    fn transpose_matvec_matches_explicit() {
        let m = Matrix::from_fn(2, 3, |r, c| (r * 3 + c) as f64);
        let mut out = vec![0.0; 3];
        m.add_transpose_matvec(&[1.0, -1.0], &mut out);
        assert_eq!(out, vec![-3.0, -3.0, -3.0]);
    }
}
