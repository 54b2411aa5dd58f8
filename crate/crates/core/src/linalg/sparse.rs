use super::{DenseMatrix, LinalgError};

/// Compressed sparse row matrix.
///
/// Column indices are strictly increasing within each row and every stored
/// value is finite and nonzero.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a matrix from per-row `(column, value)` lists. Explicit zeros are
    /// dropped.
    pub fn from_rows(cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Result<Self, LinalgError> {
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for (i, row) in rows.iter().enumerate() {
            let mut last: Option<usize> = None;
            for &(j, v) in row {
                if j >= cols {
                    return Err(LinalgError::IndexOutOfBounds { row: i, col: j });
                }
                if last.is_some_and(|l| j <= l) {
                    return Err(LinalgError::UnsortedIndices { row: i });
                }
                if !v.is_finite() {
                    return Err(LinalgError::NonFinite);
                }
                last = Some(j);
                if v != 0.0 {
                    indices.push(j);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            indptr,
            indices,
            values,
        })
    }

    /// Builds a matrix from unordered `(row, col, value)` triplets, summing
    /// duplicates.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self, LinalgError> {
        let mut per_row: Vec<Vec<(usize, f64)>> = vec![Vec::new(); rows];
        for &(i, j, v) in triplets {
            if i >= rows || j >= cols {
                return Err(LinalgError::IndexOutOfBounds { row: i, col: j });
            }
            per_row[i].push((j, v));
        }
        for row in &mut per_row {
            row.sort_by_key(|&(j, _)| j);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
            for &(j, v) in row.iter() {
                match merged.last_mut() {
                    Some((lj, lv)) if *lj == j => *lv += v,
                    _ => merged.push((j, v)),
                }
            }
            *row = merged;
        }
        Self::from_rows(cols, per_row)
    }

    pub fn from_dense(m: &DenseMatrix) -> Self {
        let rows = (0..m.rows())
            .map(|i| {
                m.row(i)
                    .iter()
                    .enumerate()
                    .filter(|(_, &v)| v != 0.0)
                    .map(|(j, &v)| (j, v))
                    .collect()
            })
            .collect();
        Self::from_rows(m.cols(), rows).expect("dense matrix entries are finite")
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `(column, value)` pairs of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[i]..self.indptr[i + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "matvec dimension mismatch");
        (0..self.rows)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    pub fn matvec_t(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.rows, "matvec_t dimension mismatch");
        let mut out = vec![0.0; self.cols];
        for (i, &yi) in y.iter().enumerate() {
            if yi == 0.0 {
                continue;
            }
            for (j, v) in self.row(i) {
                out[j] += v * yi;
            }
        }
        out
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for (j, v) in self.row(i) {
                m.set(i, j, v);
            }
        }
        m
    }

    pub fn transpose(&self) -> Self {
        let mut triplets = Vec::with_capacity(self.nnz());
        for i in 0..self.rows {
            for (j, v) in self.row(i) {
                triplets.push((j, i, v));
            }
        }
        Self::from_triplets(self.cols, self.rows, &triplets).expect("valid transpose")
    }

    /// `A diag(d) A^T` as a dense matrix.
    pub fn weighted_outer_gram(&self, d: &[f64]) -> DenseMatrix {
        assert_eq!(d.len(), self.cols);
        // Column-major view so each column contributes a rank-one update.
        let t = self.transpose();
        let mut g = DenseMatrix::zeros(self.rows, self.rows);
        for (j, &dj) in d.iter().enumerate() {
            if dj == 0.0 {
                continue;
            }
            let col: Vec<(usize, f64)> = t.row(j).collect();
            for &(a, va) in &col {
                for &(b, vb) in &col {
                    g.add_to(a, b, dj * va * vb);
                }
            }
        }
        g
    }

    /// Column sums `1^T A`.
    pub fn column_sums(&self) -> Vec<f64> {
        self.matvec_t(&vec![1.0; self.rows])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validates_structure() {
        assert!(matches!(
            SparseMatrix::from_rows(3, vec![vec![(2, 1.0), (1, 1.0)]]),
            Err(LinalgError::UnsortedIndices { row: 0 })
        ));
        assert!(matches!(
            SparseMatrix::from_rows(2, vec![vec![(2, 1.0)]]),
            Err(LinalgError::IndexOutOfBounds { .. })
        ));
        let m = SparseMatrix::from_rows(3, vec![vec![(0, 0.0), (2, 1.0)]]).unwrap();
        assert_eq!(m.nnz(), 1);
    }

    #[test]
    fn matches_dense_products() {
        let d = DenseMatrix::from_rows(&[vec![1.0, 0.0, 2.0], vec![0.0, -3.0, 0.5]]).unwrap();
        let s = SparseMatrix::from_dense(&d);
        let x = [0.3, -1.0, 2.0];
        assert_eq!(s.matvec(&x), d.matvec(&x));
        assert_eq!(s.matvec_t(&[1.0, 2.0]), d.matvec_t(&[1.0, 2.0]));
        let w = [1.0, 0.5, 2.0];
        let a = s.weighted_outer_gram(&w);
        let b = d.weighted_outer_gram(&w);
        for i in 0..2 {
            for j in 0..2 {
                assert!((a.get(i, j) - b.get(i, j)).abs() < 1e-14);
            }
        }
        assert_eq!(s.to_dense(), d);
    }
}
