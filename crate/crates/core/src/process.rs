//! Path-space data model and the conditional-sampler interface.

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::linalg::{LinalgError, SpdMatrix};

/// Eigenvalue floor accepted for an AR(1) innovation covariance.
pub const COVARIANCE_PSD_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProcessError {
    #[error("path must contain at least one point")]
    EmptyPath,
    #[error("point {index} has dimension {got}, expected {expected}")]
    PointDimension { index: usize, expected: usize, got: usize },
    #[error("path coordinate {index} is not finite")]
    NonFinite { index: usize },
    #[error("horizon mismatch: {left} vs {right}")]
    HorizonMismatch { left: usize, right: usize },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("horizon must be positive")]
    ZeroHorizon,
    #[error("invalid covariance: {0}")]
    Covariance(#[from] LinalgError),
}

/// A discrete-time path `x_0, …, x_T` of `d`-dimensional points.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    dim: usize,
    values: Vec<f64>,
}

impl Path {
    /// Builds a path from a flat buffer of `(T+1)·d` coordinates.
    pub fn from_flat(dim: usize, values: Vec<f64>) -> Result<Self, ProcessError> {
        if dim == 0 || values.is_empty() {
            return Err(ProcessError::EmptyPath);
        }
        if !values.len().is_multiple_of(dim) {
            return Err(ProcessError::PointDimension {
                index: values.len() / dim,
                expected: dim,
                got: values.len() % dim,
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(ProcessError::NonFinite { index });
        }
        Ok(Self { dim, values })
    }

    pub fn from_points(points: &[Vec<f64>]) -> Result<Self, ProcessError> {
        let dim = points.first().ok_or(ProcessError::EmptyPath)?.len();
        let mut values = Vec::with_capacity(points.len() * dim);
        for (index, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(ProcessError::PointDimension { index, expected: dim, got: p.len() });
            }
            values.extend_from_slice(p);
        }
        Self::from_flat(dim, values)
    }

    /// Scalar path (`d = 1`).
    pub fn scalar(values: &[f64]) -> Result<Self, ProcessError> {
        Self::from_flat(1, values.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of steps `T` (the path holds `T+1` points).
    pub fn horizon(&self) -> usize {
        self.values.len() / self.dim - 1
    }

    pub fn point(&self, t: usize) -> &[f64] {
        &self.values[t * self.dim..(t + 1) * self.dim]
    }

    pub fn last(&self) -> &[f64] {
        self.point(self.horizon())
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.values
    }

    /// History `x_{0:t}` as a flat slice.
    pub fn prefix(&self, t: usize) -> &[f64] {
        &self.values[..(t + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.dim)
    }
}

/// A path law given by its initial point and one-step conditional kernels.
///
/// Histories are passed as flat `(t+1)·d` slices whose last `d` entries are the
/// current state; samplers append `count·d` coordinates to `out`.
pub trait ProcessModel: Send + Sync {
    fn dimension(&self) -> usize;

    fn horizon(&self) -> usize;

    fn initial_state(&self) -> &[f64];

    /// Draws `count` independent successors of `history`, appending them to `out`.
    fn sample_next(&self, history: &[f64], count: usize, rng: &mut dyn RngCore, out: &mut Vec<f64>);
}

/// Random walk `x_{t+1} = x_t + λ_t`, `λ_t ~ N(0, Σ)`.
#[derive(Debug, Clone)]
pub struct GaussianAR1 {
    x0: Vec<f64>,
    covariance: SpdMatrix,
    factor: Vec<f64>,
    horizon: usize,
}

impl GaussianAR1 {
    pub fn new(x0: Vec<f64>, covariance: SpdMatrix, horizon: usize) -> Result<Self, ProcessError> {
        if horizon == 0 {
            return Err(ProcessError::ZeroHorizon);
        }
        if x0.len() != covariance.dim() {
            return Err(ProcessError::DimensionMismatch { left: x0.len(), right: covariance.dim() });
        }
        if let Some(index) = x0.iter().position(|v| !v.is_finite()) {
            return Err(ProcessError::NonFinite { index });
        }
        let covariance = SpdMatrix::with_tolerance(covariance.dim(), covariance.as_slice().to_vec(), COVARIANCE_PSD_TOL)?;
        let factor = covariance.factor();
        Ok(Self { x0, covariance, factor, horizon })
    }

    pub fn covariance(&self) -> &SpdMatrix {
        &self.covariance
    }

    /// The same law over a different horizon.
    pub fn with_horizon(&self, horizon: usize) -> Result<Self, ProcessError> {
        Self::new(self.x0.clone(), self.covariance.clone(), horizon)
    }
}

impl ProcessModel for GaussianAR1 {
    fn dimension(&self) -> usize {
        self.x0.len()
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn initial_state(&self) -> &[f64] {
        &self.x0
    }

    fn sample_next(&self, history: &[f64], count: usize, rng: &mut dyn RngCore, out: &mut Vec<f64>) {
        let d = self.x0.len();
        let current = &history[history.len() - d..];
        let mut z = vec![0.0; d];
        out.reserve(count * d);
        for _ in 0..count {
            for zi in z.iter_mut() {
                *zi = StandardNormal.sample(rng);
            }
            for i in 0..d {
                let row = &self.factor[i * d..(i + 1) * d];
                let noise: f64 = row.iter().zip(&z).map(|(l, zk)| l * zk).sum();
                out.push(current[i] + noise);
            }
        }
    }
}

/// Samples a full path of `model.horizon()` steps.
pub fn sample_path(model: &dyn ProcessModel, rng: &mut dyn RngCore) -> Path {
    sample_path_to(model, model.horizon(), rng)
}

/// Samples `x_{0:t}` (the path truncated at time `t`).
pub fn sample_path_to(model: &dyn ProcessModel, t: usize, rng: &mut dyn RngCore) -> Path {
    let d = model.dimension();
    let mut values = Vec::with_capacity((t + 1) * d);
    values.extend_from_slice(model.initial_state());
    let mut next = Vec::with_capacity(d);
    for _ in 0..t {
        next.clear();
        model.sample_next(&values, 1, rng, &mut next);
        values.extend_from_slice(&next);
    }
    Path { dim: d, values }
}

/// `n` independent pairs from the product law `μ ⊗ ν`.
pub fn sample_product_paths(
    model_x: &dyn ProcessModel,
    model_y: &dyn ProcessModel,
    n: usize,
    rng: &mut dyn RngCore,
) -> Result<Vec<(Path, Path)>, ProcessError> {
    if model_x.horizon() != model_y.horizon() {
        return Err(ProcessError::HorizonMismatch { left: model_x.horizon(), right: model_y.horizon() });
    }
    Ok((0..n)
        .map(|_| {
            let x = sample_path(model_x, rng);
            let y = sample_path(model_y, rng);
            (x, y)
        })
        .collect())
}

/// Time-separable stage cost `c_t(x_t, y_t)`, `t = 1..T`.
pub trait StageCost: Send + Sync {
    fn eval(&self, t: usize, x: &[f64], y: &[f64]) -> f64;
}

/// `|x − y|²`.
#[derive(Debug, Clone, Copy, Default)]
pub struct SquaredEuclidean;

impl StageCost for SquaredEuclidean {
    #[inline]
    fn eval(&self, _t: usize, x: &[f64], y: &[f64]) -> f64 {
        x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
    }
}

impl<F> StageCost for F
where
    F: Fn(usize, &[f64], &[f64]) -> f64 + Send + Sync,
{
    fn eval(&self, t: usize, x: &[f64], y: &[f64]) -> f64 {
        self(t, x, y)
    }
}

/// `Σ_{t=1}^T c_t(x_t, y_t)`; time 0 is excluded.
pub fn path_cost(cost: &dyn StageCost, x: &Path, y: &Path) -> Result<f64, ProcessError> {
    if x.horizon() != y.horizon() {
        return Err(ProcessError::HorizonMismatch { left: x.horizon(), right: y.horizon() });
    }
    if x.dim() != y.dim() {
        return Err(ProcessError::DimensionMismatch { left: x.dim(), right: y.dim() });
    }
    Ok((1..=x.horizon()).map(|t| cost.eval(t, x.point(t), y.point(t))).sum())
}
