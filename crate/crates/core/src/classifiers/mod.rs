//! The MLP classifier and the GMM log-likelihood-ratio baseline.

pub mod gmm;
pub mod mlp;
pub mod optim;

pub use gmm::{train_gmm, train_gmm_classifier, DiagonalGmm, EmHistory, GmmClassifier, GmmConfig, GmmError};
pub use mlp::{train_mlp, EpochStats, MlpConfig, MlpError, MlpModel, TrainingHistory};
pub use optim::{Adam, OptimizerKind, Sgd};

use thiserror::Error;

use crate::preprocess::Label;

/// Feature rows with their labels.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledData {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<Label>,
}

impl LabeledData {
    pub fn push(&mut self, x: Vec<f64>, y: Label) {
        self.features.push(x);
        self.labels.push(y);
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Dimension of the first row, 0 when empty.
    pub fn dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    /// `[natural, emitted]`
    pub fn class_counts(&self) -> [usize; 2] {
        let mut c = [0, 0];
        for l in &self.labels {
            c[l.index()] += 1;
        }
        c
    }

    pub fn subset(&self, indices: &[usize]) -> LabeledData {
        LabeledData {
            features: indices.iter().map(|&i| self.features[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    pub fn of_class(&self, label: Label) -> Vec<&[f64]> {
        self.features.iter().zip(&self.labels).filter(|(_, &l)| l == label).map(|(x, _)| x.as_slice()).collect()
    }
}

/// Class probabilities `[natural, emitted]` and the arg-max label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub probabilities: [f64; 2],
    pub label: Label,
}

impl Prediction {
    /// Ties go to natural.
    pub fn from_probabilities(probabilities: [f64; 2]) -> Self {
        let label = if probabilities[0] >= probabilities[1] { Label::Natural } else { Label::Emitted };
        Self { probabilities, label }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ClassifierError {
    #[error(transparent)]
    Mlp(#[from] MlpError),
    #[error(transparent)]
    Gmm(#[from] GmmError),
}

/// A trained model of either family.
#[derive(Debug, Clone, PartialEq)]
pub enum Classifier {
    Mlp(MlpModel),
    Gmm(GmmClassifier),
}

impl Classifier {
    pub fn input_dim(&self) -> usize {
        match self {
            Classifier::Mlp(m) => m.input_dim(),
            Classifier::Gmm(g) => g.input_dim(),
        }
    }

    pub fn classify(&self, x: &[f64]) -> Result<Label, ClassifierError> {
        Ok(match self {
            Classifier::Mlp(m) => m.predict(x)?.label,
            Classifier::Gmm(g) => g.classify(x)?,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Classifier::Mlp(_) => "mlp",
            Classifier::Gmm(_) => "gmm",
        }
    }
}
