use thiserror::Error;

/// Tolerance on the total mass of a [`DiscreteMeasure`].
pub const MASS_TOL: f64 = 1e-9;
/// Tolerance on the marginals of a [`Coupling`].
pub const MARGINAL_TOL: f64 = 1e-7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OtError {
    #[error("cost matrix must have at least one row and one column")]
    EmptyCost,
    #[error("cost matrix has {len} entries, expected {rows}x{cols}")]
    CostShape { rows: usize, cols: usize, len: usize },
    #[error("cost entry ({row}, {col}) is not finite")]
    NonFiniteCost { row: usize, col: usize },
    #[error("measure is empty")]
    EmptyMeasure,
    #[error("weight {index} is negative or not finite: {weight}")]
    BadWeight { index: usize, weight: f64 },
    #[error("weights sum to {total}, expected 1")]
    NotNormalized { total: f64 },
    #[error("dimension mismatch: cost is {rows}x{cols}, marginals have {n} and {m} atoms")]
    DimensionMismatch { rows: usize, cols: usize, n: usize, m: usize },
    #[error("coupling marginal violated at {side} index {index}: {got} vs {want}")]
    MarginalViolation { side: &'static str, index: usize, got: f64, want: f64 },
    #[error("coupling has a negative entry at ({row}, {col})")]
    NegativeMass { row: usize, col: usize },
    #[error("epsilon must be positive, got {0}")]
    BadEpsilon(f64),
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error("sinkhorn requires strictly positive weights; {side} weight {index} is zero")]
    ZeroWeight { side: &'static str, index: usize },
    #[error("coupling puts mass on ({row}, {col}) where the reference measure vanishes")]
    SupportViolation { row: usize, col: usize },
    #[error("sample counts differ: {0} vs {1}")]
    CountMismatch(usize, usize),
    #[error("order p must be at least 1, got {0}")]
    BadOrder(f64),
    #[error("simplex did not terminate within {0} pivots")]
    PivotLimit(usize),
}

/// Dense row-major `n×m` cost matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, OtError> {
        if rows == 0 || cols == 0 {
            return Err(OtError::EmptyCost);
        }
        if data.len() != rows * cols {
            return Err(OtError::CostShape { rows, cols, len: data.len() });
        }
        if let Some(k) = data.iter().position(|v| !v.is_finite()) {
            return Err(OtError::NonFiniteCost { row: k / cols, col: k % cols });
        }
        Ok(Self { rows, cols, data })
    }

    /// `C[i][j] = f(i, j)`.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self, OtError> {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self::new(rows, cols, data)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, OtError> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(OtError::CostShape { rows: n, cols: m, len: rows.iter().map(Vec::len).sum() });
        }
        Self::new(n, m, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Gives back the row-major buffer.
    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Probability weights on `n` atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(weights: Vec<f64>) -> Result<Self, OtError> {
        if weights.is_empty() {
            return Err(OtError::EmptyMeasure);
        }
        if let Some((index, &weight)) = weights.iter().enumerate().find(|(_, w)| !(w.is_finite() && **w >= 0.0)) {
            return Err(OtError::BadWeight { index, weight });
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(OtError::NotNormalized { total });
        }
        Ok(Self { weights })
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "uniform measure needs at least one atom");
        Self { weights: vec![1.0 / n as f64; n] }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn is_uniform(&self) -> bool {
        let w = 1.0 / self.weights.len() as f64;
        self.weights.iter().all(|&x| x == w)
    }
}

/// A transport plan between two discrete measures.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    plan: Vec<f64>,
    row_marginal: DiscreteMeasure,
    col_marginal: DiscreteMeasure,
}

impl Coupling {
    /// Validates nonnegativity and both marginals within [`MARGINAL_TOL`].
    pub fn new(plan: Vec<f64>, row_marginal: DiscreteMeasure, col_marginal: DiscreteMeasure) -> Result<Self, OtError> {
        let (n, m) = (row_marginal.len(), col_marginal.len());
        if plan.len() != n * m {
            return Err(OtError::CostShape { rows: n, cols: m, len: plan.len() });
        }
        if let Some(k) = plan.iter().position(|v| !(*v >= 0.0)) {
            return Err(OtError::NegativeMass { row: k / m, col: k % m });
        }
        for (i, want) in row_marginal.weights().iter().enumerate() {
            let got: f64 = plan[i * m..(i + 1) * m].iter().sum();
            if (got - want).abs() > MARGINAL_TOL {
                return Err(OtError::MarginalViolation { side: "row", index: i, got, want: *want });
            }
        }
        for (j, want) in col_marginal.weights().iter().enumerate() {
            let got: f64 = (0..n).map(|i| plan[i * m + j]).sum();
            if (got - want).abs() > MARGINAL_TOL {
                return Err(OtError::MarginalViolation { side: "column", index: j, got, want: *want });
            }
        }
        Ok(Self { plan, row_marginal, col_marginal })
    }

    /// The independent coupling `p ⊗ q`.
    pub fn product(p: &DiscreteMeasure, q: &DiscreteMeasure) -> Self {
        let plan = p
            .weights()
            .iter()
            .flat_map(|a| q.weights().iter().map(move |b| a * b))
            .collect();
        Self {
            plan,
            row_marginal: p.clone(),
            col_marginal: q.clone(),
        }
    }

    pub fn rows(&self) -> usize {
        self.row_marginal.len()
    }

    pub fn cols(&self) -> usize {
        self.col_marginal.len()
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.plan[row * self.cols() + col]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.plan
    }

    pub fn row_marginal(&self) -> &DiscreteMeasure {
        &self.row_marginal
    }

    pub fn col_marginal(&self) -> &DiscreteMeasure {
        &self.col_marginal
    }

    /// `Σ_ij π_ij C_ij`.
    pub fn transport_cost(&self, cost: &CostMatrix) -> f64 {
        self.plan.iter().zip(cost.as_slice()).map(|(p, c)| p * c).sum()
    }
}

pub(crate) fn check_problem(cost: &CostMatrix, p: &DiscreteMeasure, q: &DiscreteMeasure) -> Result<(), OtError> {
    if cost.rows() != p.len() || cost.cols() != q.len() {
        return Err(OtError::DimensionMismatch { rows: cost.rows(), cols: cost.cols(), n: p.len(), m: q.len() });
    }
    Ok(())
}

/// `KL(π ‖ p⊗q) = Σ π_ij ln(π_ij / (p_i q_j))` with `0 ln 0 = 0`.
pub fn kl_divergence(pi: &Coupling, p: &DiscreteMeasure, q: &DiscreteMeasure) -> Result<f64, OtError> {
    if pi.rows() != p.len() || pi.cols() != q.len() {
        return Err(OtError::DimensionMismatch { rows: pi.rows(), cols: pi.cols(), n: p.len(), m: q.len() });
    }
    let mut kl = 0.0;
    for (i, &pi_w) in p.weights().iter().enumerate() {
        for (j, &qj) in q.weights().iter().enumerate() {
            let mass = pi.get(i, j);
            if mass > 0.0 {
                let reference = pi_w * qj;
                if reference <= 0.0 {
                    return Err(OtError::SupportViolation { row: i, col: j });
                }
                kl += mass * (mass / reference).ln();
            }
        }
    }
    // Gibbs: exact KL is nonnegative; rounding may leave a tiny negative.
    Ok(kl.max(0.0))
}

/// `W_p` between two equal-size uniform point clouds on the line.
pub fn wasserstein_p_1d(xs: &[f64], ys: &[f64], p: f64) -> Result<f64, OtError> {
    if xs.len() != ys.len() {
        return Err(OtError::CountMismatch(xs.len(), ys.len()));
    }
    if xs.is_empty() {
        return Err(OtError::EmptyMeasure);
    }
    if !(p >= 1.0) {
        return Err(OtError::BadOrder(p));
    }
    let mut a = xs.to_vec();
    let mut b = ys.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let mean = a.iter().zip(&b).map(|(x, y)| (x - y).abs().powf(p)).sum::<f64>() / a.len() as f64;
    Ok(mean.powf(1.0 / p))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kl_examples() {
        let u = DiscreteMeasure::uniform(2);
        let prod = Coupling::product(&u, &u);
        assert!(kl_divergence(&prod, &u, &u).unwrap().abs() < 1e-15);
        let diag = Coupling::new(vec![0.5, 0.0, 0.0, 0.5], u.clone(), u.clone()).unwrap();
        assert!((kl_divergence(&diag, &u, &u).unwrap() - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn kl_support_violation() {
        let p = DiscreteMeasure::new(vec![1.0, 0.0]).unwrap();
        let q = DiscreteMeasure::uniform(2);
        let pi = Coupling::new(vec![0.5, 0.5, 0.0, 0.0], p.clone(), q.clone()).unwrap();
        assert!(kl_divergence(&pi, &p, &q).is_ok());
        let u = DiscreteMeasure::uniform(2);
        let off = Coupling::new(vec![0.25, 0.25, 0.25, 0.25], u.clone(), u).unwrap();
        assert_eq!(kl_divergence(&off, &p, &q), Err(OtError::SupportViolation { row: 1, col: 0 }));
    }

    #[test]
    fn wasserstein_examples() {
        assert_eq!(wasserstein_p_1d(&[1.0, 3.0], &[3.0, 1.0], 2.0).unwrap(), 0.0);
        assert!((wasserstein_p_1d(&[0.0, 1.0], &[3.0, 2.0], 2.0).unwrap() - 2.0).abs() < 1e-15);
        for p in [1.0, 2.0, 3.5] {
            assert!((wasserstein_p_1d(&[5.0], &[7.0], p).unwrap() - 2.0).abs() < 1e-12);
        }
        assert!(wasserstein_p_1d(&[1.0], &[1.0, 2.0], 1.0).is_err());
        assert!(wasserstein_p_1d(&[1.0], &[1.0], 0.5).is_err());
    }

    #[test]
    fn measure_validation() {
        assert!(DiscreteMeasure::new(vec![0.5, 0.6]).is_err());
        assert!(DiscreteMeasure::new(vec![-0.1, 1.1]).is_err());
        assert!(DiscreteMeasure::new(vec![]).is_err());
        assert!(DiscreteMeasure::new(vec![0.25; 4]).unwrap().is_uniform());
    }

    #[test]
    fn coupling_validation() {
        let u = DiscreteMeasure::uniform(2);
        assert!(Coupling::new(vec![0.5, 0.0, 0.0, 0.4], u.clone(), u.clone()).is_err());
        assert!(Coupling::new(vec![0.6, -0.1, -0.1, 0.6], u.clone(), u).is_err());
    }

    #[test]
    fn cost_validation() {
        assert!(CostMatrix::new(0, 1, vec![]).is_err());
        assert!(CostMatrix::new(1, 2, vec![1.0]).is_err());
        assert_eq!(CostMatrix::new(1, 2, vec![1.0, f64::INFINITY]), Err(OtError::NonFiniteCost { row: 0, col: 1 }));
    }
}
