//! Signal-processing features: 1212-dim MFCC and 1404-dim CQCC per 1-s
//! segment, plus the typed feature vector shared by every extractor.

mod cqcc;
mod cqt;
mod mfcc;
mod spectrum;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub use cqcc::{cqcc, Cqcc, CQCC_COEFFS, CQCC_DIM, CQCC_FRAMES};
pub use cqt::{cqt, Cqt, CqtConfig, CqtSpectrogram};
pub use mfcc::{mel_filterbank, mfcc, MelFilterbank, Mfcc, MEL_BANDS, MFCC_COEFFS, MFCC_DIM, MFCC_FRAMES};
pub use spectrum::{
    dct_ii_matrix, frame_centered, hann_window, hz_to_mel, mel_to_hz, power_spectrum, FrameConfig, PowerSpectrum, FFT_LEN,
    FRAME_HOP, FRAME_LEN, SPECTRUM_BINS,
};

/// Floor applied before every logarithm.
pub const LOG_FLOOR: f64 = 1e-10;

/// Which extractor produced a vector. The numeric codes are the kind byte
/// of the EMB1 container.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeatureKind {
    SoundNet,
    Vggish,
    Mfcc,
    Cqcc,
    Fused,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 5] =
        [FeatureKind::SoundNet, FeatureKind::Vggish, FeatureKind::Mfcc, FeatureKind::Cqcc, FeatureKind::Fused];

    pub fn code(self) -> u8 {
        match self {
            FeatureKind::SoundNet => 1,
            FeatureKind::Vggish => 2,
            FeatureKind::Mfcc => 3,
            FeatureKind::Cqcc => 4,
            FeatureKind::Fused => 5,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.code() == code)
    }

    /// Position in the fixed concatenation order: vggish, soundnet, cqcc, mfcc.
    pub fn fusion_rank(self) -> u8 {
        match self {
            FeatureKind::Vggish => 0,
            FeatureKind::SoundNet => 1,
            FeatureKind::Cqcc => 2,
            FeatureKind::Mfcc => 3,
            FeatureKind::Fused => 4,
        }
    }

    /// Dimension forced by the producing network, if any.
    pub fn fixed_dim(self) -> Option<usize> {
        match self {
            FeatureKind::SoundNet => Some(512),
            FeatureKind::Vggish => Some(128),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::SoundNet => "soundnet",
            FeatureKind::Vggish => "vggish",
            FeatureKind::Mfcc => "mfcc",
            FeatureKind::Cqcc => "cqcc",
            FeatureKind::Fused => "fused",
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown feature kind {s:?}"))
    }
}

/// Runs the signal extractor for `kind`. Embedding kinds have no extractor
/// here and return `None`.
pub fn extract(kind: FeatureKind, seg: &crate::preprocess::Segment) -> Option<FeatureVector> {
    match kind {
        FeatureKind::Mfcc => Some(mfcc(seg)),
        FeatureKind::Cqcc => Some(cqcc(seg)),
        _ => None,
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("feature vector is empty")]
    Empty,
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("{kind} vectors must have {expected} values, got {actual}")]
    WrongDim { kind: FeatureKind, expected: usize, actual: usize },
}

/// A flat feature vector tagged with its extractor.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    kind: FeatureKind,
    values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(kind: FeatureKind, values: Vec<f64>) -> Result<Self, FeatureError> {
        if values.is_empty() {
            return Err(FeatureError::Empty);
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(FeatureError::NonFinite(i));
        }
        if let Some(expected) = kind.fixed_dim() {
            if values.len() != expected {
                return Err(FeatureError::WrongDim { kind, expected, actual: values.len() });
            }
        }
        Ok(Self { kind, values })
    }

    pub fn kind(&self) -> FeatureKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub(crate) fn retag(mut self, kind: FeatureKind) -> Self {
        self.kind = kind;
        self
    }
}
