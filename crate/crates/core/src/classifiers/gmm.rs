//! Diagonal-covariance Gaussian mixtures trained by EM, and the two-class
//! log-likelihood-ratio classifier built from a pair of them.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::preprocess::Label;

pub const VARIANCE_FLOOR: f64 = 1e-4;
const DEGENERATE_WEIGHT: f64 = 1e-8;

#[derive(Debug, Error, PartialEq)]
pub enum GmmError {
    #[error("need at least {components} samples for {components} components, got {samples}")]
    TooFewSamples { samples: usize, components: usize },
    #[error("expected dimension {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("invalid mixture: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmmConfig {
    pub components: usize,
    pub max_iterations: usize,
    /// Stop once the per-sample log-likelihood gain is below
    /// `tolerance * |LL|`.
    pub tolerance: f64,
    pub variance_floor: f64,
    pub seed: u64,
}

impl Default for GmmConfig {
    fn default() -> Self {
        Self { components: 512, max_iterations: 100, tolerance: 1e-6, variance_floor: VARIANCE_FLOOR, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalGmm {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
}

impl DiagonalGmm {
    pub fn new(weights: Vec<f64>, means: Vec<Vec<f64>>, variances: Vec<Vec<f64>>) -> Result<Self, GmmError> {
        let m = weights.len();
        if m == 0 || means.len() != m || variances.len() != m {
            return Err(GmmError::Invalid("component counts disagree".into()));
        }
        let d = means[0].len();
        if means.iter().chain(&variances).any(|v| v.len() != d) {
            return Err(GmmError::Invalid("dimension counts disagree".into()));
        }
        if variances.iter().flatten().any(|&v| v.is_nan() || v <= 0.0) {
            return Err(GmmError::Invalid("variances must be positive".into()));
        }
        if (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 || weights.iter().any(|&w| w < 0.0) {
            return Err(GmmError::Invalid("weights must lie on the simplex".into()));
        }
        Ok(Self { weights, means, variances })
    }

    pub fn components(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    fn component_log_densities(&self, x: &[f64], out: &mut [f64]) {
        let log_2pi = (2.0 * PI).ln();
        for (c, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for ((xi, mu), var) in x.iter().zip(&self.means[c]).zip(&self.variances[c]) {
                let diff = xi - mu;
                acc += log_2pi + var.ln() + diff * diff / var;
            }
            *o = self.weights[c].ln() - 0.5 * acc;
        }
    }

    /// `log p(x)` via log-sum-exp.
    pub fn log_density(&self, x: &[f64]) -> Result<f64, GmmError> {
        self.check_dim(x)?;
        let mut buf = vec![0.0; self.components()];
        self.component_log_densities(x, &mut buf);
        Ok(log_sum_exp(&buf))
    }

    /// Posterior component probabilities for one sample.
    pub fn responsibilities(&self, x: &[f64]) -> Result<Vec<f64>, GmmError> {
        self.check_dim(x)?;
        let mut buf = vec![0.0; self.components()];
        self.component_log_densities(x, &mut buf);
        let total = log_sum_exp(&buf);
        buf.iter_mut().for_each(|v| *v = (*v - total).exp());
        Ok(buf)
    }

    fn check_dim(&self, x: &[f64]) -> Result<(), GmmError> {
        if x.len() != self.dim() {
            return Err(GmmError::DimensionMismatch { expected: self.dim(), actual: x.len() });
        }
        Ok(())
    }

    /// Mean per-sample log-likelihood.
    pub fn mean_log_likelihood<R: AsRef<[f64]>>(&self, data: &[R]) -> Result<f64, GmmError> {
        let mut total = 0.0;
        for x in data {
            total += self.log_density(x.as_ref())?;
        }
        Ok(total / data.len().max(1) as f64)
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means++ seeding: first center uniform, the rest proportional to the
/// squared distance from the nearest chosen center.
fn kmeans_pp<R: AsRef<[f64]>>(data: &[R], k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = data.len();
    let mut centers = vec![rng.random_range(0..n)];
    let mut nearest: Vec<f64> = data.iter().map(|x| sq_dist(x.as_ref(), data[centers[0]].as_ref())).collect();
    while centers.len() < k {
        let total: f64 = nearest.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut pick = n - 1;
            for (i, d) in nearest.iter().enumerate() {
                if target < *d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            pick
        } else {
            // every point coincides with a center already
            rng.random_range(0..n)
        };
        centers.push(next);
        for (i, x) in data.iter().enumerate() {
            nearest[i] = nearest[i].min(sq_dist(x.as_ref(), data[next].as_ref()));
        }
    }
    centers
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmHistory {
    /// Mean per-sample log-likelihood after initialization and after each
    /// M-step.
    pub log_likelihood: Vec<f64>,
    pub converged: bool,
    /// Components re-seeded because their weight collapsed.
    pub reinitialized: usize,
}

/// Fits one class's mixture.
pub fn train_gmm<R: AsRef<[f64]>>(data: &[R], config: &GmmConfig) -> Result<(DiagonalGmm, EmHistory), GmmError> {
    let n = data.len();
    let m = config.components;
    if m == 0 || n < m {
        return Err(GmmError::TooFewSamples { samples: n, components: m });
    }
    let d = data[0].as_ref().len();
    if let Some(bad) = data.iter().find(|x| x.as_ref().len() != d) {
        return Err(GmmError::DimensionMismatch { expected: d, actual: bad.as_ref().len() });
    }
    let floor = config.variance_floor;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut global_mean = vec![0.0; d];
    for x in data {
        global_mean.iter_mut().zip(x.as_ref()).for_each(|(g, v)| *g += v / n as f64);
    }
    let mut global_var = vec![0.0; d];
    for x in data {
        global_var.iter_mut().zip(x.as_ref().iter().zip(&global_mean)).for_each(|(g, (v, mu))| *g += (v - mu).powi(2) / n as f64);
    }
    global_var.iter_mut().for_each(|v| *v = v.max(floor));

    // hard assignment to the seeded centers gives the starting point
    let centers = kmeans_pp(data, m, &mut rng);
    let means: Vec<Vec<f64>> = centers.iter().map(|&i| data[i].as_ref().to_vec()).collect();
    let mut resp = vec![0.0; n * m];
    for (i, x) in data.iter().enumerate() {
        let best = (0..m).min_by(|&a, &b| sq_dist(x.as_ref(), &means[a]).total_cmp(&sq_dist(x.as_ref(), &means[b]))).unwrap();
        resp[i * m + best] = 1.0;
    }
    let mut gmm = DiagonalGmm { weights: vec![1.0 / m as f64; m], means, variances: vec![global_var.clone(); m] };
    let mut history = EmHistory::default();
    m_step(data, &resp, &mut gmm, floor, &global_var, &mut history);

    let mut log_dens = vec![0.0; m];
    let mut prev: Option<f64> = None;
    for iteration in 0..=config.max_iterations {
        // E-step
        let mut total = 0.0;
        for (i, x) in data.iter().enumerate() {
            gmm.component_log_densities(x.as_ref(), &mut log_dens);
            let lse = log_sum_exp(&log_dens);
            total += lse;
            for (r, l) in resp[i * m..(i + 1) * m].iter_mut().zip(&log_dens) {
                *r = (l - lse).exp();
            }
        }
        let ll = total / n as f64;
        history.log_likelihood.push(ll);
        if let Some(p) = prev {
            if ll - p < config.tolerance * p.abs() {
                history.converged = true;
                break;
            }
        }
        if iteration == config.max_iterations {
            break;
        }
        prev = Some(ll);
        m_step(data, &resp, &mut gmm, floor, &global_var, &mut history);
    }
    Ok((gmm, history))
}

fn m_step<R: AsRef<[f64]>>(
    data: &[R],
    resp: &[f64],
    gmm: &mut DiagonalGmm,
    floor: f64,
    global_var: &[f64],
    history: &mut EmHistory,
) {
    let n = data.len();
    let m = gmm.components();
    let d = gmm.dim();
    for c in 0..m {
        let nk: f64 = (0..n).map(|i| resp[i * m + c]).sum();
        let weight = nk / n as f64;
        if weight < DEGENERATE_WEIGHT {
            // re-seed on the sample the current mixture explains worst
            let worst = (0..n)
                .min_by(|&a, &b| {
                    let la = gmm.log_density(data[a].as_ref()).unwrap_or(f64::NEG_INFINITY);
                    let lb = gmm.log_density(data[b].as_ref()).unwrap_or(f64::NEG_INFINITY);
                    la.total_cmp(&lb)
                })
                .unwrap();
            log::warn!("gmm: component {c} collapsed (weight {weight:e}); reinitialized at sample {worst}");
            gmm.means[c] = data[worst].as_ref().to_vec();
            gmm.variances[c] = global_var.to_vec();
            gmm.weights[c] = 1.0 / n as f64;
            history.reinitialized += 1;
            continue;
        }
        let mut mean = vec![0.0; d];
        for (i, x) in data.iter().enumerate() {
            let r = resp[i * m + c];
            if r != 0.0 {
                mean.iter_mut().zip(x.as_ref()).for_each(|(mu, v)| *mu += r * v);
            }
        }
        mean.iter_mut().for_each(|mu| *mu /= nk);
        let mut var = vec![0.0; d];
        for (i, x) in data.iter().enumerate() {
            let r = resp[i * m + c];
            if r != 0.0 {
                var.iter_mut().zip(x.as_ref().iter().zip(&mean)).for_each(|(s, (v, mu))| *s += r * (v - mu) * (v - mu));
            }
        }
        var.iter_mut().for_each(|s| *s = (*s / nk).max(floor));
        gmm.weights[c] = weight;
        gmm.means[c] = mean;
        gmm.variances[c] = var;
    }
    let total: f64 = gmm.weights.iter().sum();
    gmm.weights.iter_mut().for_each(|w| *w /= total);
}

/// Natural-vs-emitted classifier from two class-conditional mixtures.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmClassifier {
    pub natural: DiagonalGmm,
    pub emitted: DiagonalGmm,
    pub config: GmmConfig,
}

impl GmmClassifier {
    pub fn input_dim(&self) -> usize {
        self.natural.dim()
    }

    /// `log p(x | natural) - log p(x | emitted)`
    pub fn score(&self, x: &[f64]) -> Result<f64, GmmError> {
        Ok(self.natural.log_density(x)? - self.emitted.log_density(x)?)
    }

    /// Natural iff the LLR is strictly positive.
    pub fn classify(&self, x: &[f64]) -> Result<Label, GmmError> {
        Ok(if self.score(x)? > 0.0 { Label::Natural } else { Label::Emitted })
    }
}

/// Trains both class mixtures with the same configuration.
pub fn train_gmm_classifier<R: AsRef<[f64]>>(
    natural: &[R],
    emitted: &[R],
    config: &GmmConfig,
) -> Result<GmmClassifier, GmmError> {
    let (nat, h1) = train_gmm(natural, config)?;
    let (emi, h2) = train_gmm(emitted, config)?;
    log::debug!(
        "gmm: natural LL {:?} after {} iterations, emitted LL {:?} after {}",
        h1.log_likelihood.last(),
        h1.log_likelihood.len(),
        h2.log_likelihood.last(),
        h2.log_likelihood.len()
    );
    if nat.dim() != emi.dim() {
        return Err(GmmError::DimensionMismatch { expected: nat.dim(), actual: emi.dim() });
    }
    Ok(GmmClassifier { natural: nat, emitted: emi, config: config.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn gaussian_logpdf(x: &[f64], mean: &[f64], var: &[f64]) -> f64 {
        x.iter().zip(mean).zip(var).map(|((x, m), v)| -0.5 * ((2.0 * PI * v).ln() + (x - m).powi(2) / v)).sum()
    }

    #[test]
    fn single_component_is_the_mle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let normal = Normal::new(1.0, 2.0).unwrap();
        let data: Vec<Vec<f64>> = (0..300).map(|_| vec![normal.sample(&mut rng), 3.0 * normal.sample(&mut rng)]).collect();
        let (gmm, _) = train_gmm(&data, &GmmConfig { components: 1, ..GmmConfig::default() }).unwrap();
        for j in 0..2 {
            let mean: f64 = data.iter().map(|x| x[j]).sum::<f64>() / 300.0;
            let var: f64 = data.iter().map(|x| (x[j] - mean).powi(2)).sum::<f64>() / 300.0;
            assert!((gmm.means[0][j] - mean).abs() < 1e-8);
            assert!((gmm.variances[0][j] - var).abs() < 1e-8);
        }
        assert_eq!(gmm.weights, vec![1.0]);
    }

    #[test]
    fn two_clusters_are_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let noise = Normal::new(0.0, 0.5).unwrap();
        let data: Vec<Vec<f64>> = (0..400).map(|i| vec![if i % 2 == 0 { -5.0 } else { 5.0 } + noise.sample(&mut rng)]).collect();
        let (gmm, history) = train_gmm(&data, &GmmConfig { components: 2, seed: 1, ..GmmConfig::default() }).unwrap();
        let mut means: Vec<f64> = gmm.means.iter().map(|m| m[0]).collect();
        means.sort_by(f64::total_cmp);
        assert!((means[0] + 5.0).abs() < 0.1, "{means:?}");
        assert!((means[1] - 5.0).abs() < 0.1, "{means:?}");
        assert!(history.converged);
    }

    #[test]
    fn log_likelihood_never_decreases() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let data: Vec<Vec<f64>> =
            (0..200).map(|i| (0..3).map(|j| normal.sample(&mut rng) + ((i % 3) * j) as f64).collect()).collect();
        let (_, h) = train_gmm(&data, &GmmConfig { components: 4, ..GmmConfig::default() }).unwrap();
        assert!(h.log_likelihood.windows(2).all(|w| w[1] >= w[0] - 1e-8), "{:?}", h.log_likelihood);
    }

    #[test]
    fn variances_respect_the_floor_and_weights_sum_to_one() {
        // many exact duplicates force a zero-variance cluster
        let data: Vec<Vec<f64>> = (0..50).map(|i| vec![if i < 40 { 1.0 } else { i as f64 }]).collect();
        let (gmm, _) = train_gmm(&data, &GmmConfig { components: 3, ..GmmConfig::default() }).unwrap();
        assert!(gmm.variances.iter().flatten().all(|&v| v >= VARIANCE_FLOOR));
        assert!((gmm.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn responsibilities_sum_to_one() {
        let gmm = DiagonalGmm::new(
            vec![0.2, 0.3, 0.5],
            vec![vec![0.0, 0.0], vec![3.0, 1.0], vec![-2.0, 4.0]],
            vec![vec![1.0, 2.0], vec![0.5, 0.5], vec![3.0, 1.0]],
        )
        .unwrap();
        for x in [[0.0, 0.0], [100.0, -50.0], [3.0, 1.0]] {
            let r = gmm.responsibilities(&x).unwrap();
            assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn too_few_samples() {
        let data = vec![vec![0.0]; 3];
        assert_eq!(
            train_gmm(&data, &GmmConfig { components: 4, ..GmmConfig::default() }).unwrap_err(),
            GmmError::TooFewSamples { samples: 3, components: 4 }
        );
    }

    #[test]
    fn identical_mixtures_score_zero() {
        let g = DiagonalGmm::new(vec![1.0], vec![vec![1.0, 2.0]], vec![vec![1.0, 1.0]]).unwrap();
        let clf = GmmClassifier { natural: g.clone(), emitted: g, config: GmmConfig::default() };
        for x in [[0.0, 0.0], [5.0, -3.0]] {
            assert_eq!(clf.score(&x).unwrap(), 0.0);
            // zero LLR is not natural
            assert_eq!(clf.classify(&x).unwrap(), Label::Emitted);
        }
    }

    #[test]
    fn llr_matches_closed_form_gaussians() {
        let (m1, v1) = (vec![0.5, -1.0, 2.0], vec![1.5, 0.2, 3.0]);
        let (m2, v2) = (vec![10.0, 0.0, -2.0], vec![0.7, 1.0, 2.0]);
        let clf = GmmClassifier {
            natural: DiagonalGmm::new(vec![1.0], vec![m1.clone()], vec![v1.clone()]).unwrap(),
            emitted: DiagonalGmm::new(vec![1.0], vec![m2.clone()], vec![v2.clone()]).unwrap(),
            config: GmmConfig::default(),
        };
        for x in [m1.clone(), vec![3.0, 3.0, 3.0], m2.clone()] {
            let expected = gaussian_logpdf(&x, &m1, &v1) - gaussian_logpdf(&x, &m2, &v2);
            assert!((clf.score(&x).unwrap() - expected).abs() < 1e-9);
        }
        assert!(clf.score(&m1).unwrap() > 0.0);
        assert_eq!(clf.classify(&m1).unwrap(), Label::Natural);
    }

    #[test]
    fn llr_is_finite_far_from_both_mixtures() {
        let a = DiagonalGmm::new(vec![0.5, 0.5], vec![vec![0.0], vec![1.0]], vec![vec![1e-4], vec![1e-4]]).unwrap();
        let b = DiagonalGmm::new(vec![1.0], vec![vec![-1.0]], vec![vec![1e-4]]).unwrap();
        let clf = GmmClassifier { natural: a, emitted: b, config: GmmConfig::default() };
        assert!(clf.score(&[1e4]).unwrap().is_finite());
    }

    #[test]
    fn dimension_mismatch() {
        let g = DiagonalGmm::new(vec![1.0], vec![vec![1.0, 2.0]], vec![vec![1.0, 1.0]]).unwrap();
        assert_eq!(g.log_density(&[1.0]), Err(GmmError::DimensionMismatch { expected: 2, actual: 1 }));
    }
}
