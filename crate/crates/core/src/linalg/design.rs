use super::{DenseMatrix, SparseMatrix};

/// Design matrix of a regression instance, dense or sparse.
#[derive(Clone, Debug, PartialEq)]
pub enum Design {
    Dense(DenseMatrix),
    Sparse(SparseMatrix),
}

impl Design {
    pub fn rows(&self) -> usize {
        match self {
            Design::Dense(m) => m.rows(),
            Design::Sparse(m) => m.rows(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            Design::Dense(m) => m.cols(),
            Design::Sparse(m) => m.cols(),
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Design::Dense(m) => m.matvec(x),
            Design::Sparse(m) => m.matvec(x),
        }
    }

    pub fn matvec_t(&self, y: &[f64]) -> Vec<f64> {
        match self {
            Design::Dense(m) => m.matvec_t(y),
            Design::Sparse(m) => m.matvec_t(y),
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        match self {
            Design::Dense(m) => m.clone(),
            Design::Sparse(m) => m.to_dense(),
        }
    }

    /// `X diag(d) X^T`, materialized.
    pub fn weighted_outer_gram(&self, d: &[f64]) -> DenseMatrix {
        match self {
            Design::Dense(m) => m.weighted_outer_gram(d),
            Design::Sparse(m) => m.weighted_outer_gram(d),
        }
    }

    /// `X^T X`, materialized.
    pub fn gram(&self) -> DenseMatrix {
        match self {
            Design::Dense(m) => m.gram(),
            Design::Sparse(m) => m.transpose().weighted_outer_gram(&vec![1.0; m.rows()]),
        }
    }

    /// `X_S` restricted to the given columns, dense.
    pub fn dense_columns(&self, cols: &[usize]) -> DenseMatrix {
        match self {
            Design::Dense(m) => m.select_columns(cols),
            Design::Sparse(m) => m.to_dense().select_columns(cols),
        }
    }
}

impl From<DenseMatrix> for Design {
    fn from(m: DenseMatrix) -> Self {
        Design::Dense(m)
    }
}

impl From<SparseMatrix> for Design {
    fn from(m: SparseMatrix) -> Self {
        Design::Sparse(m)
    }
}
