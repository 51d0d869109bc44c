//! Dense lower-triangular Cholesky factor with the updates needed for the
//! sweep: appending a row/column, removing one, and rank-1 updates.
//!
//! Storage is by column: `cols[j][i - j]` holds `L[i][j]` for `i >= j`, so
//! appending a variable pushes one value onto every column.

use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CholeskyFactor {
    cols: Vec<Vec<f64>>,
}

impl CholeskyFactor {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Factor a dense symmetric positive definite matrix (lower triangle used).
    pub fn from_dense(a: &[Vec<f64>]) -> Result<Self> {
        let n = a.len();
        let mut f = Self { cols: Vec::with_capacity(n) };
        let mut column = Vec::with_capacity(n);
        for j in 0..n {
            column.clear();
            column.extend((0..=j).map(|i| a[j][i]));
            f.append(&column)?;
        }
        Ok(f)
    }

    pub fn dim(&self) -> usize {
        self.cols.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i < j {
            0.0
        } else {
            self.cols[j][i - j]
        }
    }

    pub fn diagonal(&self) -> impl Iterator<Item = f64> + '_ {
        self.cols.iter().map(|c| c[0])
    }

    pub fn min_diagonal(&self) -> f64 {
        self.diagonal().fold(f64::INFINITY, f64::min)
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self.diagonal().map(f64::ln).sum::<f64>()
    }

    /// Solve `L z = b` in place.
    pub fn forward_solve(&self, b: &mut [f64]) {
        for (j, col) in self.cols.iter().enumerate() {
            let z = b[j] / col[0];
            b[j] = z;
            if z != 0.0 {
                for (k, l) in col[1..].iter().enumerate() {
                    b[j + 1 + k] -= l * z;
                }
            }
        }
    }

    /// Solve `Lᵀ x = z` in place.
    pub fn backward_solve(&self, z: &mut [f64]) {
        for i in (0..self.cols.len()).rev() {
            let col = &self.cols[i];
            let s: f64 = col[1..].iter().zip(&z[i + 1..]).map(|(l, x)| l * x).sum();
            z[i] = (z[i] - s) / col[0];
        }
    }

    /// Solve `L Lᵀ x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.forward_solve(&mut x);
        self.backward_solve(&mut x);
        x
    }

    /// Grow the factored matrix by one variable. `column` holds the new
    /// row of the matrix: its entries against the existing variables followed
    /// by the new diagonal entry.
    pub fn append(&mut self, column: &[f64]) -> Result<()> {
        let n = self.dim();
        if column.len() != n + 1 {
            return Err(Error::DimensionMismatch {
                expected: n + 1,
                found: column.len(),
            });
        }
        let mut z = column[..n].to_vec();
        self.forward_solve(&mut z);
        let d2 = column[n] - z.iter().map(|v| v * v).sum::<f64>();
        if !(d2 > 0.0) || !d2.is_finite() {
            return Err(Error::Numerical(format!("matrix is not positive definite (pivot {d2:e})")));
        }
        for (col, v) in self.cols.iter_mut().zip(z) {
            col.push(v);
        }
        self.cols.push(vec![d2.sqrt()]);
        Ok(())
    }

    /// Remove variable `p`, leaving the factor of the matrix with row and
    /// column `p` deleted.
    pub fn remove(&mut self, p: usize) -> Result<()> {
        let n = self.dim();
        if p >= n {
            return Err(Error::InvalidParameter(format!("position {p} out of range for {n} variables")));
        }
        for (j, col) in self.cols[..p].iter_mut().enumerate() {
            col.remove(p - j);
        }
        let removed = self.cols.remove(p);
        let mut x = removed[1..].to_vec();
        self.rank1_update_from(p, &mut x);
        Ok(())
    }

    /// `L Lᵀ ← L Lᵀ + x xᵀ`.
    pub fn rank1_update(&mut self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        let first = match x.iter().position(|v| *v != 0.0) {
            Some(k) => k,
            None => return Ok(()),
        };
        let mut tail = x[first..].to_vec();
        self.rank1_update_from(first, &mut tail);
        Ok(())
    }

    /// Rank-1 update of the trailing block starting at variable `start`, with
    /// `x` indexed relative to `start`.
    fn rank1_update_from(&mut self, start: usize, x: &mut [f64]) {
        for k in 0..x.len() {
            let xk = x[k];
            if xk == 0.0 {
                continue;
            }
            let col = &mut self.cols[start + k];
            let lkk = col[0];
            let r = lkk.hypot(xk);
            let c = r / lkk;
            let s = xk / lkk;
            col[0] = r;
            for (i, l) in col[1..].iter_mut().enumerate() {
                let xi = &mut x[k + 1 + i];
                *l = (*l + s * *xi) / c;
                *xi = c * *xi - s * *l;
            }
        }
    }

    /// `L Lᵀ` as a dense matrix.
    pub fn reconstruct(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..=i {
                let s: f64 = (0..=j).map(|k| self.get(i, k) * self.get(j, k)).sum();
                a[i][j] = s;
                a[j][i] = s;
            }
        }
        a
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use nalgebra::DMatrix;
    use rand::Rng;

    fn spd(n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = stream_rng(seed, 0);
        let b = DMatrix::<f64>::from_fn(n, n + 3, |_, _| rng.random::<f64>() - 0.5);
        let a = &b * b.transpose() + DMatrix::identity(n, n) * 0.1;
        (0..n).map(|i| (0..n).map(|j| a[(i, j)]).collect()).collect()
    }

    fn rel_err(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (ra, rb) in a.iter().zip(b) {
            for (x, y) in ra.iter().zip(rb) {
                num += (x - y) * (x - y);
                den += y * y;
            }
        }
        (num / den).sqrt()
    }

    #[test]
    fn factor_reconstructs() {
        let a = spd(12, 1);
        let f = CholeskyFactor::from_dense(&a).unwrap();
        assert!(rel_err(&f.reconstruct(), &a) < 1e-13);
        let m = DMatrix::from_fn(12, 12, |i, j| a[i][j]);
        let det = m.determinant().ln();
        assert!((f.log_det() - det).abs() < 1e-10);
    }

    #[test]
    fn remove_matches_refactorization() {
        let a = spd(20, 2);
        for p in [0, 7, 19] {
            let mut f = CholeskyFactor::from_dense(&a).unwrap();
            f.remove(p).unwrap();
            let reduced: Vec<Vec<f64>> = a
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != p)
                .map(|(_, r)| r.iter().enumerate().filter(|(j, _)| *j != p).map(|(_, v)| *v).collect())
                .collect();
            let direct = CholeskyFactor::from_dense(&reduced).unwrap();
            for i in 0..19 {
                for j in 0..=i {
                    assert!((f.get(i, j) - direct.get(i, j)).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn rank1_matches_refactorization() {
        let mut a = spd(15, 3);
        let mut f = CholeskyFactor::from_dense(&a).unwrap();
        let mut x = vec![0.0; 15];
        x[4] = 0.7;
        x[9] = -0.3;
        x[14] = 1.1;
        f.rank1_update(&x).unwrap();
        for i in 0..15 {
            for j in 0..15 {
                a[i][j] += x[i] * x[j];
            }
        }
        assert!(rel_err(&f.reconstruct(), &a) < 1e-13);
        let zero = vec![0.0; 15];
        let before = f.clone();
        f.rank1_update(&zero).unwrap();
        assert_eq!(f, before);
    }

    #[test]
    fn solve_inverts() {
        let a = spd(9, 4);
        let f = CholeskyFactor::from_dense(&a).unwrap();
        let b: Vec<f64> = (0..9).map(|i| i as f64 - 3.0).collect();
        let x = f.solve(&b);
        for i in 0..9 {
            let r: f64 = (0..9).map(|j| a[i][j] * x[j]).sum();
            assert!((r - b[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn rejects_indefinite() {
        let a = vec![vec![1.0, 2.0], vec![2.0, 1.0]];
        assert!(matches!(CholeskyFactor::from_dense(&a), Err(Error::Numerical(_))));
    }
}
