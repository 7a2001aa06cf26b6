//! Principal component projection used to bring MFCC and CQCC down to 128
//! dimensions.
//!
//! Fitting goes through a symmetric eigendecomposition of either the
//! `d x d` sample covariance or, when there are fewer samples than
//! dimensions, the `n x n` Gram matrix of the centered data. Both give the
//! same principal directions. Components are fitted on training vectors
//! only and then reused for every split.

use nalgebra::{DMatrix, SymmetricEigen};
use thiserror::Error;

use crate::dsp::FeatureVector;

/// Eigenvalues below this fraction of the largest are treated as zero.
const RELATIVE_RANK_TOL: f64 = 1e-10;

#[derive(Debug, Error, PartialEq)]
pub enum PcaError {
    #[error("expected dimension {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("need at least {k} samples to fit {k} components, got {n}")]
    TooFewSamples { n: usize, k: usize },
    #[error("cannot fit {k} components in {d} dimensions")]
    TooManyComponents { k: usize, d: usize },
    #[error("row {0} contains a non-finite value")]
    NonFinite(usize),
    #[error("no samples")]
    Empty,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `k x d`, orthonormal rows ordered by decreasing explained variance.
    /// Rows past `rank` are zero.
    pub components: Vec<Vec<f64>>,
    /// Variance captured by each component (unbiased, `n - 1` denominator).
    pub explained_variance: Vec<f64>,
    /// Number of components backed by a nonzero singular value.
    pub rank: usize,
}

impl PcaModel {
    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn output_dim(&self) -> usize {
        self.components.len()
    }

    pub fn is_rank_deficient(&self) -> bool {
        self.rank < self.output_dim()
    }

    /// `components . (x - mean)`
    pub fn transform(&self, x: &[f64]) -> Result<Vec<f64>, PcaError> {
        if x.len() != self.input_dim() {
            return Err(PcaError::DimensionMismatch { expected: self.input_dim(), actual: x.len() });
        }
        Ok(self.components.iter().map(|c| c.iter().zip(x.iter().zip(&self.mean)).map(|(w, (v, m))| w * (v - m)).sum()).collect())
    }

    /// Projects a feature vector, keeping its kind tag.
    pub fn transform_vector(&self, x: &FeatureVector) -> Result<FeatureVector, PcaError> {
        let values = self.transform(x.values())?;
        Ok(FeatureVector::new(x.kind(), values).expect("projection of finite input is finite"))
    }

    /// `mean + components^T . y`
    pub fn reconstruct(&self, y: &[f64]) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (c, &w) in self.components.iter().zip(y) {
            out.iter_mut().zip(c).for_each(|(o, ci)| *o += w * ci);
        }
        out
    }
}

/// Fits the top `k` principal directions of the rows of `data`.
///
/// When the centered data has fewer than `k` nonzero singular values the
/// missing components are zero rows; `rank` records how many are real and
/// a warning is logged.
pub fn fit<R: AsRef<[f64]>>(data: &[R], k: usize) -> Result<PcaModel, PcaError> {
    let n = data.len();
    if n == 0 {
        return Err(PcaError::Empty);
    }
    let d = data[0].as_ref().len();
    for (i, row) in data.iter().enumerate() {
        let row = row.as_ref();
        if row.len() != d {
            return Err(PcaError::DimensionMismatch { expected: d, actual: row.len() });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(PcaError::NonFinite(i));
        }
    }
    if k > d {
        return Err(PcaError::TooManyComponents { k, d });
    }
    if n < k {
        return Err(PcaError::TooFewSamples { n, k });
    }

    let mut mean = vec![0.0; d];
    for row in data {
        mean.iter_mut().zip(row.as_ref()).for_each(|(m, v)| *m += v);
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let centered = DMatrix::from_fn(n, d, |i, j| data[i].as_ref()[j] - mean[j]);
    let dof = (n.max(2) - 1) as f64;

    // (variance, direction) pairs, unsorted
    let mut pairs: Vec<(f64, Vec<f64>)> = if n < d {
        let gram = &centered * centered.transpose();
        let eig = SymmetricEigen::new(gram);
        (0..n)
            .map(|i| {
                let lambda = eig.eigenvalues[i].max(0.0);
                let u = eig.eigenvectors.column(i);
                let v = centered.tr_mul(&u);
                let norm = v.norm();
                let dir = if norm > 0.0 { v.iter().map(|x| x / norm).collect() } else { vec![0.0; d] };
                (lambda / dof, dir)
            })
            .collect()
    } else {
        let cov = centered.tr_mul(&centered) / dof;
        let eig = SymmetricEigen::new(cov);
        (0..d).map(|i| (eig.eigenvalues[i].max(0.0), eig.eigenvectors.column(i).iter().copied().collect())).collect()
    };
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));

    let top = pairs.first().map_or(0.0, |p| p.0);
    let tol = top * RELATIVE_RANK_TOL;
    let mut components = Vec::with_capacity(k);
    let mut explained_variance = Vec::with_capacity(k);
    let mut rank = 0;
    for (var, mut dir) in pairs.into_iter().take(k) {
        if var > tol && top > 0.0 {
            orient(&mut dir);
            components.push(dir);
            explained_variance.push(var);
            rank += 1;
        } else {
            break;
        }
    }
    if rank < k {
        log::warn!("PCA rank deficient: {rank} nonzero components of {k} requested; padding with zeros");
        components.resize(k, vec![0.0; d]);
        explained_variance.resize(k, 0.0);
    }
    Ok(PcaModel { mean, components, explained_variance, rank })
}

/// Flips a direction so its largest-magnitude entry is positive.
fn orient(dir: &mut [f64]) {
    let mut best = 0;
    for (i, v) in dir.iter().enumerate() {
        if v.abs() > dir[best].abs() {
            best = i;
        }
    }
    if dir[best] < 0.0 {
        dir.iter_mut().for_each(|v| *v = -*v);
    }
}

pub fn fit_vectors(data: &[FeatureVector], k: usize) -> Result<PcaModel, PcaError> {
    let rows: Vec<&[f64]> = data.iter().map(FeatureVector::values).collect();
    fit(&rows, k)
}
