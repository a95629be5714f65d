//! Small dense symmetric-matrix utilities.
//!
//! Matrices here are tiny (the largest covariance in the experiments is 20×20),
//! so everything is row-major `Vec<f64>` with cyclic Jacobi rotations for the
//! eigendecomposition.

use thiserror::Error;

/// Symmetry tolerance, relative to the largest entry magnitude (at least 1).
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Smallest eigenvalue accepted as "semidefinite" before clamping.
pub const PSD_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not square: {len} entries for dimension {dim}")]
    NotSquare { dim: usize, len: usize },
    #[error("matrix dimension must be at least 1")]
    Empty,
    #[error("matrix entry ({row}, {col}) is not finite")]
    NonFinite { row: usize, col: usize },
    #[error("matrix is not symmetric: |a[{row},{col}] - a[{col},{row}]| = {gap:e}")]
    Asymmetric { row: usize, col: usize, gap: f64 },
    #[error("matrix is not positive semidefinite: smallest eigenvalue {min_eigenvalue:e}")]
    NotSemidefinite { min_eigenvalue: f64 },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
}

/// A symmetric positive semidefinite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SpdMatrix {
    /// Validates symmetry and semidefiniteness (eigenvalues ≥ −[`PSD_TOL`]).
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self, LinalgError> {
        Self::with_tolerance(dim, data, PSD_TOL)
    }

    /// Like [`SpdMatrix::new`] with an explicit lower bound on the eigenvalues.
    pub fn with_tolerance(dim: usize, data: Vec<f64>, psd_tol: f64) -> Result<Self, LinalgError> {
        check_symmetric(dim, &data)?;
        let (values, _) = symmetric_eigen(dim, &data);
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        if min < -psd_tol {
            return Err(LinalgError::NotSemidefinite { min_eigenvalue: min });
        }
        Ok(Self { dim, data })
    }

    pub fn identity(dim: usize) -> Self {
        Self::scaled_identity(dim, 1.0)
    }

    /// `scale · I`; `scale` must be nonnegative.
    pub fn scaled_identity(dim: usize, scale: f64) -> Self {
        assert!(scale >= 0.0 && scale.is_finite(), "scale must be finite and nonnegative");
        Self::diagonal(&vec![scale; dim])
    }

    /// Diagonal matrix; entries must be nonnegative.
    pub fn diagonal(diag: &[f64]) -> Self {
        assert!(diag.iter().all(|v| *v >= 0.0 && v.is_finite()), "diagonal must be finite and nonnegative");
        let dim = diag.len();
        let mut data = vec![0.0; dim * dim];
        for (i, v) in diag.iter().enumerate() {
            data[i * dim + i] = *v;
        }
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.dim + col]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// Eigenvalues (ascending) and the matching orthonormal eigenvectors,
    /// stored as the columns of a row-major matrix.
    pub fn eigen(&self) -> (Vec<f64>, Vec<f64>) {
        symmetric_eigen(self.dim, &self.data)
    }

    /// Returns `c · self`; `c` must be nonnegative.
    pub fn scaled(&self, c: f64) -> Self {
        assert!(c >= 0.0, "scale must be nonnegative");
        Self {
            dim: self.dim,
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    /// A factor `L` with `L Lᵀ = self`.
    ///
    /// Cholesky when the matrix is positive definite; otherwise
    /// `Q · diag(√λ⁺)` from the eigendecomposition.
    pub fn factor(&self) -> Vec<f64> {
        cholesky(self.dim, &self.data).unwrap_or_else(|| {
            let n = self.dim;
            let (values, vectors) = self.eigen();
            let mut l = vec![0.0; n * n];
            for i in 0..n {
                for k in 0..n {
                    l[i * n + k] = vectors[i * n + k] * values[k].max(0.0).sqrt();
                }
            }
            l
        })
    }
}

fn check_symmetric(dim: usize, data: &[f64]) -> Result<(), LinalgError> {
    if dim == 0 {
        return Err(LinalgError::Empty);
    }
    if data.len() != dim * dim {
        return Err(LinalgError::NotSquare { dim, len: data.len() });
    }
    if let Some(k) = data.iter().position(|v| !v.is_finite()) {
        return Err(LinalgError::NonFinite { row: k / dim, col: k % dim });
    }
    let scale = data.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    for i in 0..dim {
        for j in (i + 1)..dim {
            let gap = (data[i * dim + j] - data[j * dim + i]).abs();
            if gap > SYMMETRY_TOL * scale {
                return Err(LinalgError::Asymmetric { row: i, col: j, gap });
            }
        }
    }
    Ok(())
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Returns eigenvalues in ascending order and eigenvectors as columns.
pub fn symmetric_eigen(n: usize, data: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut a = data.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let norm: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * norm || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
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
    order.sort_by(|&i, &j| a[i * n + i].total_cmp(&a[j * n + j]));
    let values = order.iter().map(|&i| a[i * n + i]).collect();
    let mut vectors = vec![0.0; n * n];
    for (new_col, &old_col) in order.iter().enumerate() {
        for k in 0..n {
            vectors[k * n + new_col] = v[k * n + old_col];
        }
    }
    (values, vectors)
}

/// Lower-triangular Cholesky factor, or `None` if a pivot is not positive.
pub fn cholesky(n: usize, data: &[f64]) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = data[i * n + j];
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= 0.0 {
                    return None;
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// Row-major product of two `n×n` matrices.
pub fn matmul(n: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            for j in 0..n {
                out[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    out
}

/// Principal square root via eigendecomposition, negative eigenvalues clamped to 0.
pub fn spd_sqrt(m: &SpdMatrix) -> SpdMatrix {
    let n = m.dim();
    let (values, vectors) = m.eigen();
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let s: f64 = (0..n)
                .map(|k| vectors[i * n + k] * values[k].max(0.0).sqrt() * vectors[j * n + k])
                .sum();
            data[i * n + j] = s;
            data[j * n + i] = s;
        }
    }
    SpdMatrix { dim: n, data }
}

/// Symmetric square root of a raw symmetric matrix, rejecting asymmetric input.
pub fn spd_sqrt_checked(dim: usize, data: Vec<f64>) -> Result<SpdMatrix, LinalgError> {
    Ok(spd_sqrt(&SpdMatrix::new(dim, data)?))
}

/// `A B A` for symmetric `A`, symmetrized to absorb rounding.
pub(crate) fn sandwich(a: &SpdMatrix, b: &SpdMatrix) -> Result<SpdMatrix, LinalgError> {
    if a.dim() != b.dim() {
        return Err(LinalgError::DimensionMismatch { left: a.dim(), right: b.dim() });
    }
    let n = a.dim();
    let mut data = matmul(n, &matmul(n, a.as_slice(), b.as_slice()), a.as_slice());
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (data[i * n + j] + data[j * n + i]);
            data[i * n + j] = avg;
            data[j * n + i] = avg;
        }
    }
    Ok(SpdMatrix { dim: n, data })
}

#[cfg(test)]
fn frobenius(data: &[f64]) -> f64 {
    data.iter().map(|v| v * v).sum::<f64>().sqrt()
}
