//! Accuracy, confusion matrix and per-class recall on a labelled split.

use std::fmt;

use thiserror::Error;

use super::manifest::ManifestRecord;
use crate::classifiers::{Classifier, ClassifierError};
use crate::preprocess::Label;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("no features for key {0:?}")]
    MissingFeature(String),
    #[error("split has no records")]
    EmptySplit,
    #[error("feature dimension {actual} does not match model input {expected}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error("{0}")]
    Other(String),
}

/// Looks up the feature vector for a manifest key.
pub trait FeatureSource {
    fn features(&self, key: &str) -> Result<Vec<f64>, EvalError>;
}

impl<F: Fn(&str) -> Option<Vec<f64>>> FeatureSource for F {
    fn features(&self, key: &str) -> Result<Vec<f64>, EvalError> {
        self(key).ok_or_else(|| EvalError::MissingFeature(key.to_string()))
    }
}

/// Anything that maps a feature vector to a label.
pub trait Predictor {
    fn predict_label(&self, x: &[f64]) -> Result<Label, EvalError>;
}

impl Predictor for Classifier {
    fn predict_label(&self, x: &[f64]) -> Result<Label, EvalError> {
        if x.len() != self.input_dim() {
            return Err(EvalError::DimensionMismatch { expected: self.input_dim(), actual: x.len() });
        }
        Ok(self.classify(x)?)
    }
}

/// Always answers with the same label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConstantPredictor(pub Label);

impl Predictor for ConstantPredictor {
    fn predict_label(&self, _: &[f64]) -> Result<Label, EvalError> {
        Ok(self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport {
    pub n: usize,
    pub accuracy: f64,
    /// `confusion[truth][predicted]`, indexed by [`Label::index`].
    pub confusion: [[usize; 2]; 2],
    /// NaN for a class with no examples.
    pub recall: [f64; 2],
}

impl EvalReport {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (Label, Label)>) -> Result<Self, EvalError> {
        let mut confusion = [[0usize; 2]; 2];
        for (truth, pred) in pairs {
            confusion[truth.index()][pred.index()] += 1;
        }
        let n: usize = confusion.iter().flatten().sum();
        if n == 0 {
            return Err(EvalError::EmptySplit);
        }
        let correct = confusion[0][0] + confusion[1][1];
        let recall = [0, 1].map(|c| {
            let row = confusion[c][0] + confusion[c][1];
            if row == 0 {
                f64::NAN
            } else {
                confusion[c][c] as f64 / row as f64
            }
        });
        Ok(Self { n, accuracy: correct as f64 / n as f64, confusion, recall })
    }

    /// Machine-readable `key=value` lines.
    pub fn key_values(&self) -> String {
        let mut s = format!("n={}\naccuracy={:.6}\n", self.n, self.accuracy);
        for truth in Label::ALL {
            for pred in Label::ALL {
                s += &format!("confusion_{}_{}={}\n", truth, pred, self.confusion[truth.index()][pred.index()]);
            }
        }
        for l in Label::ALL {
            s += &format!("recall_{}={:.6}\n", l, self.recall[l.index()]);
        }
        s
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "segments: {}", self.n)?;
        writeln!(f, "accuracy: {:.4}", self.accuracy)?;
        writeln!(f, "{:>16} {:>10} {:>10} {:>8}", "truth \\ pred", "natural", "emitted", "recall")?;
        for l in Label::ALL {
            let row = self.confusion[l.index()];
            writeln!(f, "{:>16} {:>10} {:>10} {:>8.4}", l.as_str(), row[0], row[1], self.recall[l.index()])?;
        }
        Ok(())
    }
}

/// Classifies every record and tallies the results.
pub fn evaluate<'a, P, S>(
    model: &P,
    records: impl IntoIterator<Item = &'a ManifestRecord>,
    features: &S,
) -> Result<EvalReport, EvalError>
where
    P: Predictor + ?Sized,
    S: FeatureSource + ?Sized,
{
    let mut pairs = Vec::new();
    for r in records {
        let x = features.features(&r.key)?;
        pairs.push((r.label, model.predict_label(&x)?));
    }
    EvalReport::from_pairs(pairs)
}
