//! Dense exact linear algebra over `ℚ(√d)`.

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::scalarfield::QuadScalar;

#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<QuadScalar>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![QuadScalar::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = QuadScalar::one();
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<QuadScalar>>) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Parse("ragged matrix rows".into()));
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[QuadScalar] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<QuadScalar>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn column_sums(&self) -> Vec<QuadScalar> {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| &self[(i, j)]).sum())
            .collect()
    }

    /// The sub-matrix on the given row and column index lists.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(rows.len(), cols.len());
        for (a, &i) in rows.iter().enumerate() {
            for (b, &j) in cols.iter().enumerate() {
                out[(a, b)] = self[(i, j)].clone();
            }
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(QuadScalar::is_zero)
    }

    pub fn minus_identity(&self) -> Matrix {
        let mut m = self.clone();
        for i in 0..self.rows.min(self.cols) {
            m[(i, i)] -= &QuadScalar::one();
        }
        m
    }

    pub fn mul_vec(&self, v: &[QuadScalar]) -> Vec<QuadScalar> {
        assert_eq!(v.len(), self.cols, "dimension mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, x)| a * x).sum())
            .collect()
    }

    /// Reduced row echelon form and the pivot columns.
    pub fn rref(&self) -> (Matrix, Vec<usize>) {
        let mut m = self.clone();
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..m.cols {
            if r == m.rows {
                break;
            }
            let Some(p) = (r..m.rows).find(|&i| !m[(i, c)].is_zero()) else {
                continue;
            };
            m.swap_rows(r, p);
            let inv = m[(r, c)].inv().expect("pivot is nonzero");
            for j in c..m.cols {
                m[(r, j)] = &m[(r, j)] * &inv;
            }
            for i in 0..m.rows {
                if i == r || m[(i, c)].is_zero() {
                    continue;
                }
                let factor = m[(i, c)].clone();
                for j in c..m.cols {
                    let delta = &factor * &m[(r, j)];
                    m[(i, j)] -= &delta;
                }
            }
            pivots.push(c);
            r += 1;
        }
        (m, pivots)
    }

    /// A basis of the right kernel, one vector per free column.
    pub fn nullspace(&self) -> Vec<Vec<QuadScalar>> {
        let (reduced, pivots) = self.rref();
        let free = (0..self.cols).filter(|c| !pivots.contains(c));
        free.map(|f| {
            let mut v = vec![QuadScalar::zero(); self.cols];
            v[f] = QuadScalar::one();
            for (r, &pc) in pivots.iter().enumerate() {
                v[pc] = -&reduced[(r, f)];
            }
            v
        })
        .collect()
    }

    pub fn determinant(&self) -> Result<QuadScalar> {
        if !self.is_square() {
            return Err(Error::Degenerate(format!("{}x{} matrix has no determinant", self.rows, self.cols)));
        }
        let mut m = self.clone();
        let mut det = QuadScalar::one();
        for c in 0..m.cols {
            let Some(p) = (c..m.rows).find(|&i| !m[(i, c)].is_zero()) else {
                return Ok(QuadScalar::zero());
            };
            if p != c {
                m.swap_rows(p, c);
                det = -det;
            }
            let pivot = m[(c, c)].clone();
            let inv = pivot.inv()?;
            det *= &pivot;
            for i in c + 1..m.rows {
                if m[(i, c)].is_zero() {
                    continue;
                }
                let factor = &m[(i, c)] * &inv;
                for j in c..m.cols {
                    let delta = &factor * &m[(c, j)];
                    m[(i, j)] -= &delta;
                }
            }
        }
        Ok(det)
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = QuadScalar;
    fn index(&self, (i, j): (usize, usize)) -> &QuadScalar {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut QuadScalar {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries((0..self.rows).map(|i| self.row(i))).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(rows: &[&[&str]]) -> Matrix {
        Matrix::from_rows(
            rows.iter()
                .map(|r| r.iter().map(|s| s.parse().unwrap()).collect())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn nullspace_of_rank_one() {
        let a = m(&[&["1", "2"], &["2", "4"]]);
        let ns = a.nullspace();
        assert_eq!(ns.len(), 1);
        assert!(a.mul_vec(&ns[0]).iter().all(QuadScalar::is_zero));
        assert!(Matrix::identity(3).nullspace().is_empty());
        assert_eq!(Matrix::zeros(2, 3).nullspace().len(), 3);
    }

    #[test]
    fn determinant_small() {
        let a = m(&[&["0", "1"], &["1", "0"]]);
        assert_eq!(a.determinant().unwrap(), QuadScalar::from_int(-1));
        let b = m(&[&["1+sqrt(3)", "1"], &["2", "-1+sqrt(3)"]]);
        // (1+√3)(√3−1) − 2 = 0
        assert!(b.determinant().unwrap().is_zero());
        assert_eq!(b.nullspace().len(), 1);
        assert!(Matrix::zeros(2, 3).determinant().is_err());
    }

    fn small_matrix() -> impl Strategy<Value = Matrix> {
        (1usize..5).prop_flat_map(|n| {
            prop::collection::vec((-3i64..4, -2i64..3, 1i64..4), n * n).prop_map(move |cells| {
                let rows = cells
                    .chunks(n)
                    .map(|r| {
                        r.iter()
                            .map(|&(a, b, den)| QuadScalar::small(a, b, den, 3).unwrap())
                            .collect()
                    })
                    .collect();
                Matrix::from_rows(rows).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn kernel_vectors_are_annihilated(a in small_matrix()) {
            let ns = a.nullspace();
            for v in &ns {
                prop_assert!(a.mul_vec(v).iter().all(QuadScalar::is_zero));
            }
            let (_, pivots) = a.rref();
            prop_assert_eq!(ns.len() + pivots.len(), a.cols());
            prop_assert_eq!(a.determinant().unwrap().is_zero(), !ns.is_empty());
        }
    }
}
