//! Dense symmetric eigendecomposition and SVD by Jacobi rotations.
//!
//! Intended for desk-scale matrices (a few hundred rows at most).

use super::DenseMatrix;

const MAX_SWEEPS: usize = 100;

/// Eigenpairs of a symmetric matrix, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    /// Column `k` is the unit eigenvector for `values[k]`.
    pub vectors: DenseMatrix,
}

impl SymmetricEigen {
    /// Cyclic Jacobi on the symmetric part of `a`.
    pub fn new(a: &DenseMatrix) -> Self {
        let n = a.rows();
        assert_eq!(n, a.cols(), "eigendecomposition needs a square matrix");
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                m[i * n + j] = 0.5 * (a.get(i, j) + a.get(j, i));
            }
        }
        let mut v = vec![0.0; n * n];
        for i in 0..n {
            v[i * n + i] = 1.0;
        }
        let total: f64 = m.iter().map(|x| x * x).sum::<f64>().sqrt();
        for _ in 0..MAX_SWEEPS {
            let off: f64 = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| m[i * n + j] * m[i * n + j])
                .sum::<f64>()
                .sqrt();
            if off <= 1e-15 * total || off == 0.0 {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = m[p * n + q];
                    if apq == 0.0 {
                        continue;
                    }
                    let app = m[p * n + p];
                    let aqq = m[q * n + q];
                    let theta = (aqq - app) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let mkp = m[k * n + p];
                        let mkq = m[k * n + q];
                        m[k * n + p] = c * mkp - s * mkq;
                        m[k * n + q] = s * mkp + c * mkq;
                    }
                    for k in 0..n {
                        let mpk = m[p * n + k];
                        let mqk = m[q * n + k];
                        m[p * n + k] = c * mpk - s * mqk;
                        m[q * n + k] = s * mpk + c * mqk;
                    }
                    for k in 0..n {
                        let vkp = v[k * n + p];
                        let vkq = v[k * n + q];
                        v[k * n + p] = c * vkp - s * vkq;
                        v[k * n + q] = s * vkp + c * vkq;
                    }
                }
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| m[a * n + a].total_cmp(&m[b * n + b]));
        let values = order.iter().map(|&k| m[k * n + k]).collect();
        let mut vectors = DenseMatrix::zeros(n, n);
        for (new_k, &k) in order.iter().enumerate() {
            for i in 0..n {
                vectors.set(i, new_k, v[i * n + k]);
            }
        }
        Self { values, vectors }
    }

    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    /// `Q f(Λ) Q^T`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> DenseMatrix {
        let n = self.values.len();
        let fv: Vec<f64> = self.values.iter().map(|&x| f(x)).collect();
        let mut out = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let s: f64 = (0..n)
                    .map(|k| self.vectors.get(i, k) * fv[k] * self.vectors.get(j, k))
                    .sum();
                out.set(i, j, s);
                out.set(j, i, s);
            }
        }
        out
    }
}

/// Singular value decomposition `A = U diag(s) V^T` (thin).
#[derive(Clone, Debug)]
pub struct Svd {
    /// `rows x k`, `k = min(rows, cols)`.
    pub u: DenseMatrix,
    /// Descending.
    pub singular_values: Vec<f64>,
    /// `cols x k`.
    pub v: DenseMatrix,
}

impl Svd {
    /// One-sided (Hestenes) Jacobi SVD.
    pub fn new(a: &DenseMatrix) -> Self {
        if a.rows() < a.cols() {
            let t = Self::new(&a.transpose());
            return Self {
                u: t.v,
                singular_values: t.singular_values,
                v: t.u,
            };
        }
        let (m, n) = (a.rows(), a.cols());
        // Work on columns of A.
        let mut cols: Vec<Vec<f64>> = (0..n).map(|j| a.column(j)).collect();
        let mut v: Vec<Vec<f64>> = (0..n)
            .map(|j| {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                e
            })
            .collect();
        for _ in 0..MAX_SWEEPS {
            let mut rotated = false;
            for p in 0..n {
                for q in (p + 1)..n {
                    let alpha: f64 = cols[p].iter().map(|x| x * x).sum();
                    let beta: f64 = cols[q].iter().map(|x| x * x).sum();
                    let gamma: f64 = cols[p].iter().zip(&cols[q]).map(|(x, y)| x * y).sum();
                    if gamma == 0.0 || gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                        continue;
                    }
                    rotated = true;
                    let zeta = (beta - alpha) / (2.0 * gamma);
                    let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                    let t = if zeta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = c * t;
                    for i in 0..m {
                        let xp = cols[p][i];
                        let xq = cols[q][i];
                        cols[p][i] = c * xp - s * xq;
                        cols[q][i] = s * xp + c * xq;
                    }
                    for i in 0..n {
                        let vp = v[p][i];
                        let vq = v[q][i];
                        v[p][i] = c * vp - s * vq;
                        v[q][i] = s * vp + c * vq;
                    }
                }
            }
            if !rotated {
                break;
            }
        }
        let norms: Vec<f64> = cols
            .iter()
            .map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt())
            .collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));
        let mut u = DenseMatrix::zeros(m, n);
        let mut vm = DenseMatrix::zeros(n, n);
        let mut singular_values = Vec::with_capacity(n);
        for (k, &j) in order.iter().enumerate() {
            let s = norms[j];
            singular_values.push(s);
            for i in 0..m {
                u.set(i, k, if s > 0.0 { cols[j][i] / s } else { 0.0 });
            }
            for i in 0..n {
                vm.set(i, k, v[j][i]);
            }
        }
        Self {
            u,
            singular_values,
            v: vm,
        }
    }

    /// `U diag(f(s)) V^T`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> DenseMatrix {
        let (m, n, k) = (self.u.rows(), self.v.rows(), self.singular_values.len());
        let mut out = DenseMatrix::zeros(m, n);
        for r in 0..k {
            let s = f(self.singular_values[r]);
            if s == 0.0 {
                continue;
            }
            for i in 0..m {
                let ui = self.u.get(i, r) * s;
                if ui == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.add_to(i, j, ui * self.v.get(j, r));
                }
            }
        }
        out
    }
}

/// `A^p` for symmetric PSD `A` (negative eigenvalues from rounding clamp to 0).
pub fn psd_power(a: &DenseMatrix, p: f64) -> DenseMatrix {
    SymmetricEigen::new(a).map(|x| x.max(0.0).powf(p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
        DenseMatrix::new(rows, cols, data).unwrap()
    }

    #[test]
    fn eigen_reconstructs() {
        let a = random(6, 6, 1).gram();
        let e = SymmetricEigen::new(&a);
        let back = e.map(|x| x);
        assert!(back.sub(&a).max_abs() < 1e-12);
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn svd_reconstructs_both_shapes() {
        for (r, c) in [(5, 3), (3, 5), (4, 4)] {
            let a = random(r, c, (r * 10 + c) as u64);
            let s = Svd::new(&a);
            assert!(s.reconstruct_with(|x| x).sub(&a).max_abs() < 1e-12);
            assert!(s.singular_values.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn psd_sqrt_squares_back() {
        let a = random(5, 5, 9).gram();
        let r = psd_power(&a, 0.5);
        assert!(r.matmul(&r).sub(&a).max_abs() < 1e-10);
    }
}
